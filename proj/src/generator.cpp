#include "sage/generator.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "sage/dsl/parser.hpp"
#include "sage/dsl/printer.hpp"

namespace sage::gen {

namespace fs = std::filesystem;

namespace {

std::optional<std::string> read_file_if_exists(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace

RunLog::RunLog(fs::path dir) : dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

int RunLog::begin(const PromptText& prompt) {
    std::lock_guard lock(mutex_);
    int id = counter_++;
    char prefix[8];
    std::snprintf(prefix, sizeof(prefix), "%02d", id);
    write_file(dir_ / (std::string(prefix) + "-" + to_string(prompt.kind) + ".prompt.txt"),
               prompt.text);
    return id;
}

void RunLog::finish(int id, const PromptText& prompt, const std::string& response) {
    std::lock_guard lock(mutex_);
    char prefix[8];
    std::snprintf(prefix, sizeof(prefix), "%02d", id);
    write_file(dir_ / (std::string(prefix) + "-" + to_string(prompt.kind) + ".response.txt"),
               response);
}

GeneratorResponse generate(Backend& backend, const PromptText& prompt, RunLog* log) {
    int id = -1;
    if (log && log->enabled()) id = log->begin(prompt);
    try {
        std::string raw = backend.generate_text(prompt);
        if (id >= 0) log->finish(id, prompt, raw);
        return GeneratorResponse{prompt.kind, std::move(raw)};
    } catch (const Error& e) {
        if (id >= 0) log->finish(id, prompt, std::string("<backend error> ") + e.what());
        throw;
    }
}

MockBackend::MockBackend(fs::path fixtures_dir) : dir_(std::move(fixtures_dir)) {}

std::string MockBackend::generate_text(const PromptText& prompt) {
    std::lock_guard lock(mutex_);
    int call_index = calls_[prompt.kind]++;

    if (auto exact = read_file_if_exists(dir_ / to_string(prompt.kind) / (prompt.digest() + ".txt")))
        return *exact;

    if (auto seq = read_file_if_exists(
            dir_ / (std::string(to_string(prompt.kind)) + "." + std::to_string(call_index) +
                    ".txt")))
        return *seq;

    if (prompt.kind == PromptKind::RectifyDefects) {
        if (auto fixed = rectify_fallback(prompt)) return *fixed;
    }

    throw FixtureMiss("no mock fixture for " + std::string(to_string(prompt.kind)) + " call #" +
                      std::to_string(call_index) + " (digest " + prompt.digest() + ") under " +
                      dir_.string());
}

std::optional<std::string> MockBackend::rectify_fallback(const PromptText& prompt) {
    auto rules_text = read_file_if_exists(dir_ / "rectify.json");
    if (!rules_text) return std::nullopt;

    nlohmann::json rules;
    try {
        rules = nlohmann::json::parse(*rules_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FixtureMiss(std::string("bad rectify.json: ") + e.what());
    }
    bool one_per_round = rules.value("mode", std::string("all")) == "one_per_round";
    if (!rules.contains("bodies") || !rules["bodies"].is_object()) return std::nullopt;

    // The task program is the last fenced abm block in the prompt.
    std::size_t open = prompt.text.rfind("```abm\n");
    if (open == std::string::npos) return std::nullopt;
    std::size_t start = open + 7;
    std::size_t close = prompt.text.find("\n```", start);
    if (close == std::string::npos) return std::nullopt;
    std::string source = prompt.text.substr(start, close - start + 1);

    dsl::ParseResult parsed = dsl::parse_program(source);
    if (!parsed.program) return std::nullopt;  // rule repair cannot fix broken syntax
    dsl::AbmProgram program = *parsed.program;

    auto body_for = [&](const std::string& object,
                        const std::string& activity) -> std::optional<std::vector<dsl::Statement>> {
        std::string key = object + "." + activity;
        if (!rules["bodies"].contains(key)) return std::nullopt;
        std::vector<Defect> scratch;
        auto stmts = dsl::parse_statements_text(rules["bodies"][key].get<std::string>(), scratch);
        if (!stmts)
            throw FixtureMiss("rectify.json body for " + key + " does not parse");
        return stmts;
    };

    int repaired = 0;
    for (auto& obj : program.objects) {
        for (auto& act : obj.activities) {
            if (one_per_round && repaired > 0) break;
            if (!act.body.empty() && !act.is_todo()) continue;
            if (auto body = body_for(obj.name, act.name)) {
                act.body = *body;
                ++repaired;
            }
        }
    }
    // activities listed in the rules but absent from the program get added
    if (!(one_per_round && repaired > 0)) {
        for (const auto& [key, value] : rules["bodies"].items()) {
            (void)value;
            if (one_per_round && repaired > 0) break;
            auto dot = key.find('.');
            if (dot == std::string::npos) continue;
            std::string object = key.substr(0, dot), activity = key.substr(dot + 1);
            dsl::ObjectClass* cls = program.find_object(object);
            if (!cls || cls->find_activity(activity)) continue;
            dsl::Activity act;
            act.name = activity;
            act.body = *body_for(object, activity);
            cls->activities.push_back(std::move(act));
            ++repaired;
        }
    }
    if (repaired == 0) return std::nullopt;
    return "```abm\n" + dsl::print_program(program) + "```\n";
}

struct RemoteBackend::Impl {
    RemoteConfig config;
    std::string host;
    std::string path;
    std::string api_key;
    int inflight = 0;
    std::mutex mutex;
    std::condition_variable cv;

    explicit Impl(RemoteConfig c) : config(std::move(c)) {
        // split http://host[:port]/path
        std::string url = config.endpoint;
        auto scheme = url.find("://");
        std::string rest = scheme == std::string::npos ? url : url.substr(scheme + 3);
        auto slash = rest.find('/');
        host = url.substr(0, scheme == std::string::npos ? 0 : scheme + 3) +
               (slash == std::string::npos ? rest : rest.substr(0, slash));
        path = slash == std::string::npos ? "/" : rest.substr(slash);
        if (const char* key = std::getenv(config.api_key_env.c_str())) api_key = key;
    }

    struct Gate {
        Impl& impl;
        explicit Gate(Impl& i) : impl(i) {
            std::unique_lock lock(impl.mutex);
            impl.cv.wait(lock, [&] { return impl.inflight < impl.config.max_inflight; });
            ++impl.inflight;
        }
        ~Gate() {
            {
                std::lock_guard lock(impl.mutex);
                --impl.inflight;
            }
            impl.cv.notify_one();
        }
    };
};

RemoteBackend::RemoteBackend(RemoteConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

RemoteBackend::~RemoteBackend() = default;

std::string RemoteBackend::generate_text(const PromptText& prompt) {
    Impl::Gate gate(*impl_);

    nlohmann::json body = {
        {"model", impl_->config.model},
        {"temperature", 0},
        {"messages", {{{"role", "user"}, {"content", prompt.text}}}},
    };
    std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= impl_->config.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));

        httplib::Client client(impl_->host);
        auto seconds = static_cast<time_t>(impl_->config.timeout_s);
        auto micros = static_cast<time_t>((impl_->config.timeout_s - seconds) * 1e6);
        client.set_connection_timeout(seconds, micros);
        client.set_read_timeout(seconds, micros);
        httplib::Headers headers;
        if (!impl_->api_key.empty())
            headers.emplace("Authorization", "Bearer " + impl_->api_key);

        auto res = client.Post(impl_->path, headers, payload, "application/json");
        if (!res) {
            last_error = "connection failed or timed out";
            continue;
        }
        if (res->status >= 500) {
            last_error = "server error " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw BackendRefusal("remote backend returned status " +
                                 std::to_string(res->status));
        try {
            auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendRefusal(std::string("unexpected response shape: ") + e.what());
        }
    }
    throw BackendTimeout("remote backend unreachable after " +
                         std::to_string(impl_->config.max_retries + 1) + " attempts: " +
                         last_error);
}

}  // namespace sage::gen
