#include "lmss/lmss.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "lmss/runner.hpp"

struct lmss_runner {
    lmss::RunOptions opts;
    std::string last_error;
};

namespace {

lmss_status null_handle() { return LMSS_ERR_SCHEMA; }

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

}  // namespace

extern "C" {

const char* lmss_version(void) { return LMSS_VERSION; }

lmss_status lmss_runner_create(lmss_runner** out) {
    if (!out) return LMSS_ERR_SCHEMA;
    *out = new (std::nothrow) lmss_runner();
    return *out ? LMSS_OK : LMSS_ERR_BUDGET;
}

void lmss_runner_destroy(lmss_runner* runner) { delete runner; }

lmss_status lmss_runner_set_seed(lmss_runner* runner, uint64_t seed) {
    if (!runner) return null_handle();
    runner->opts.seed = seed;
    return LMSS_OK;
}

lmss_status lmss_runner_set_threads(lmss_runner* runner, int threads) {
    if (!runner) return null_handle();
    if (threads < 1) {
        runner->last_error = "threads: must be >= 1";
        return LMSS_ERR_SCHEMA;
    }
    runner->opts.threads = threads;
    return LMSS_OK;
}

lmss_status lmss_runner_set_max_cells(lmss_runner* runner, uint64_t max_cells) {
    if (!runner) return null_handle();
    if (max_cells == 0) {
        runner->last_error = "max_cells: must be >= 1";
        return LMSS_ERR_SCHEMA;
    }
    runner->opts.max_cells = max_cells;
    return LMSS_OK;
}

lmss_status lmss_runner_set_output_dir(lmss_runner* runner, const char* path) {
    if (!runner) return null_handle();
    if (path)
        runner->opts.output_dir = path;
    else
        runner->opts.output_dir.reset();
    return LMSS_OK;
}

lmss_status lmss_runner_set_cache_dir(lmss_runner* runner, const char* path) {
    if (!runner) return null_handle();
    if (path)
        runner->opts.cache_dir = path;
    else
        runner->opts.cache_dir.reset();
    return LMSS_OK;
}

lmss_status lmss_runner_set_command(lmss_runner* runner, const char* command) {
    if (!runner) return null_handle();
    if (command)
        runner->opts.command = command;
    else
        runner->opts.command.reset();
    return LMSS_OK;
}

lmss_status lmss_runner_run(lmss_runner* runner, const char* config_json, char** summary_json) {
    if (!runner) return null_handle();
    if (summary_json) *summary_json = nullptr;
    if (!config_json) {
        runner->last_error = "config is NULL";
        return LMSS_ERR_SCHEMA;
    }
    try {
        lmss::RunOutcome out = lmss::run(config_json, runner->opts);
        if (out.exit_code != lmss::exit_ok) {
            runner->last_error = out.message;
            return static_cast<lmss_status>(out.exit_code);
        }
        runner->last_error.clear();
        if (summary_json) {
            *summary_json = copy_string(out.summary.dump(2));
            if (!*summary_json) {
                runner->last_error = "out of memory";
                return LMSS_ERR_BUDGET;
            }
        }
        return LMSS_OK;
    } catch (...) {
        runner->last_error = "internal error";
        return LMSS_ERR_INTERNAL;
    }
}

const char* lmss_runner_last_error(const lmss_runner* runner) {
    return runner ? runner->last_error.c_str() : "null runner handle";
}

void lmss_string_free(char* s) { std::free(s); }

}  // extern "C"
