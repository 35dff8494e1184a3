#pragma once

#include <cstdint>
#include <string>

#include "sage/error.hpp"
#include "sage/eval.hpp"

namespace sage::cli {

// Effective settings for one invocation. Precedence, lowest to highest:
// built-in defaults, config file, SAGE_* environment variables, flags.
struct RunConfig {
    // generator backend
    std::string backend = "mock";  // mock | remote
    std::string endpoint = "http://localhost:8080/v1/chat/completions";
    std::string model = "default";
    double timeout_s = 60.0;
    int max_retries = 2;
    int max_inflight = 4;
    std::string fixtures_dir = "fixtures";

    // pipeline budgets
    int modeling_budget = 10;
    int solving_budget = 5;
    int inner_budget = 5;

    // simulation
    std::int64_t seed = 0;
    std::int64_t steps = 100;

    // similarity weights
    eval::CodeBleuWeights weights;

    // run artifacts
    std::string run_root = "runs";
};

// Parses the key = value / [section] config format documented in the
// README. Unknown keys raise ConfigError naming the key.
RunConfig parse_config_text(const std::string& text, const RunConfig& base = {});
RunConfig load_config_file(const std::string& path, const RunConfig& base = {});

// SAGE_BACKEND, SAGE_ENDPOINT, SAGE_MODEL, SAGE_FIXTURES override the file.
void apply_env(RunConfig& config);

}  // namespace sage::cli
