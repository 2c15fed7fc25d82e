#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "lmss/lmss.h"

int main(int argc, char** argv) {
    CLI::App app{"Simulation and verification runs for multiparameter stable sheets with variable Hurst index."};
    app.set_version_flag("--version", std::string(lmss_version()));

    std::string command, config_path, output_dir, cache_dir;
    std::uint64_t seed = 0, max_cells = 0;
    int threads = 0;
    app.add_option("command", command,
                   "simulate | localtime | check-existence | verify-lemmas | scan-increments | scaling-probe | "
                   "calibrate-constants (default: the config's command)");
    app.add_option("-c,--config", config_path, "JSON config file, '-' for stdin")->required();
    auto* seed_opt = app.add_option("--seed", seed, "overrides the config seed");
    auto* threads_opt = app.add_option("--threads", threads, "replicate workers")->check(CLI::PositiveNumber);
    auto* cells_opt = app.add_option("--max-cells", max_cells, "budget for lattice cells and similar sizes")
                          ->check(CLI::PositiveNumber);
    app.add_option("-o,--output", output_dir, "output directory (overrides output_dir)");
    app.add_option("--cache-dir", cache_dir, "measure cache directory (default: LMSS_CACHE_DIR)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : LMSS_ERR_SCHEMA;
    }

    std::string text;
    if (config_path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        text = ss.str();
    } else {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) {
            std::fprintf(stderr, "error: cannot read %s\n", config_path.c_str());
            return LMSS_ERR_IO;
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }

    lmss_runner* runner = nullptr;
    if (lmss_runner_create(&runner) != LMSS_OK) {
        std::fprintf(stderr, "error: cannot create runner\n");
        return LMSS_ERR_INTERNAL;
    }
    if (*seed_opt) lmss_runner_set_seed(runner, seed);
    if (*threads_opt) lmss_runner_set_threads(runner, threads);
    if (*cells_opt) lmss_runner_set_max_cells(runner, max_cells);
    if (!output_dir.empty()) lmss_runner_set_output_dir(runner, output_dir.c_str());
    if (!cache_dir.empty()) lmss_runner_set_cache_dir(runner, cache_dir.c_str());
    if (!command.empty()) lmss_runner_set_command(runner, command.c_str());

    char* summary = nullptr;
    const lmss_status st = lmss_runner_run(runner, text.c_str(), &summary);
    if (st == LMSS_OK) {
        std::printf("%s\n", summary);
        lmss_string_free(summary);
    } else {
        std::fprintf(stderr, "error: %s\n", lmss_runner_last_error(runner));
    }
    lmss_runner_destroy(runner);
    return st;
}
