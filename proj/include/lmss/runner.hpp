#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lmss/config.hpp"
#include "lmss/error.hpp"

namespace lmss {

enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_schema = 2,
    exit_numeric = 3,
    exit_budget = 4,
    exit_io = 5,
};

int exit_code_for(ErrorKind kind);

struct RunOptions {
    std::optional<std::uint64_t> seed;       // overrides the config seed
    std::optional<int> threads;
    std::optional<std::uint64_t> max_cells;
    std::optional<std::string> output_dir;   // overrides the config output_dir
    std::optional<std::string> cache_dir;    // empty: LMSS_CACHE_DIR, else no cache
    std::optional<std::string> command;      // must match the config command when both are given
};

struct RunOutcome {
    int exit_code = exit_ok;
    std::string message;
    json summary;                    // command-specific headline numbers
    std::vector<std::string> files;  // written paths, manifest last
};

const std::vector<std::string>& command_names();

// Parses, validates and executes one config document; never throws.
RunOutcome run(const std::string& config_text, const RunOptions& opts);

}  // namespace lmss
