#include "sage/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace sage::cli {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key \"" + key + "\" needs a numeric value, got \"" + value +
                              "\"",
                          key);
    }
}

std::string parse_string(const std::string& value, const std::string& key) {
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
        return value.substr(1, value.size() - 2);
    if (!value.empty() && value.front() != '"') return value;
    throw ConfigError("config key \"" + key + "\" has a malformed string value", key);
}

std::vector<double> parse_array(const std::string& value, const std::string& key) {
    if (value.size() < 2 || value.front() != '[' || value.back() != ']')
        throw ConfigError("config key \"" + key + "\" needs an array value", key);
    std::vector<double> out;
    std::stringstream ss(value.substr(1, value.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_number(item, key));
    }
    return out;
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const RunConfig& base) {
    RunConfig config = base;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("bad section header at line " + std::to_string(lineno), line);
            section = trim(line.substr(1, line.size() - 2));
            if (section != "generator" && section != "pipeline" && section != "simulate" &&
                section != "eval" && section != "artifacts")
                throw ConfigError("unknown config section \"" + section + "\"", section);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value at line " + std::to_string(lineno), line);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        std::string full = section.empty() ? key : section + "." + key;

        if (full == "generator.backend") {
            config.backend = parse_string(value, full);
            if (config.backend != "mock" && config.backend != "remote")
                throw ConfigError("generator.backend must be \"mock\" or \"remote\"", full);
        } else if (full == "generator.endpoint") {
            config.endpoint = parse_string(value, full);
        } else if (full == "generator.model") {
            config.model = parse_string(value, full);
        } else if (full == "generator.timeout_s") {
            config.timeout_s = parse_number(value, full);
        } else if (full == "generator.max_retries") {
            config.max_retries = static_cast<int>(parse_number(value, full));
        } else if (full == "generator.max_inflight") {
            config.max_inflight = static_cast<int>(parse_number(value, full));
        } else if (full == "generator.fixtures_dir") {
            config.fixtures_dir = parse_string(value, full);
        } else if (full == "pipeline.modeling_budget") {
            config.modeling_budget = static_cast<int>(parse_number(value, full));
        } else if (full == "pipeline.solving_budget") {
            config.solving_budget = static_cast<int>(parse_number(value, full));
        } else if (full == "pipeline.inner_budget") {
            config.inner_budget = static_cast<int>(parse_number(value, full));
        } else if (full == "simulate.seed") {
            config.seed = static_cast<std::int64_t>(parse_number(value, full));
        } else if (full == "simulate.steps") {
            config.steps = static_cast<std::int64_t>(parse_number(value, full));
        } else if (full == "eval.weights") {
            auto w = parse_array(value, full);
            if (w.size() != 4)
                throw ConfigError("eval.weights needs exactly 4 entries", full);
            config.weights = {w[0], w[1], w[2], w[3]};
        } else if (full == "artifacts.run_root") {
            config.run_root = parse_string(value, full);
        } else {
            throw ConfigError("unknown config key \"" + full + "\"", full);
        }
    }
    return config;
}

RunConfig load_config_file(const std::string& path, const RunConfig& base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path, path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), base);
}

void apply_env(RunConfig& config) {
    if (const char* v = std::getenv("SAGE_BACKEND")) config.backend = v;
    if (const char* v = std::getenv("SAGE_ENDPOINT")) config.endpoint = v;
    if (const char* v = std::getenv("SAGE_MODEL")) config.model = v;
    if (const char* v = std::getenv("SAGE_FIXTURES")) config.fixtures_dir = v;
}

}  // namespace sage::cli
