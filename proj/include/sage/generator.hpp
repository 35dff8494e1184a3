#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sage/dsl/patch.hpp"
#include "sage/error.hpp"

namespace sage::gen {

enum class PromptKind { GenAbm, RectifyDefects, GenVerification, CoT, Modify };

// Stable lowercase names, used in fixture and run-artifact file names.
const char* to_string(PromptKind kind);

class MissingSlot : public Error {
public:
    using Error::Error;
};

class PayloadParseError : public Error {
public:
    PayloadParseError(std::string msg, std::size_t offset_) : Error(std::move(msg)), offset(offset_) {}
    std::size_t offset = 0;  // byte offset into the raw response
};

class BackendTimeout : public Error {
public:
    using Error::Error;
};

class BackendRefusal : public Error {
public:
    using Error::Error;
};

class FixtureMiss : public Error {
public:
    using Error::Error;
};

struct PromptText {
    PromptKind kind = PromptKind::GenAbm;
    std::string text;
    std::map<std::string, std::string> slots;  // structured values, for logging

    // Order-independent fingerprint of (kind, slots); mock fixture key.
    std::string digest() const;
};

// Renders the registered template for `kind`. The slot set must match the
// template exactly; rendering is deterministic.
PromptText render_prompt(PromptKind kind, const std::map<std::string, std::string>& slots);

// Slot names each template expects, in render order.
const std::vector<std::string>& prompt_slots(PromptKind kind);

struct CoTRelation {
    enum class Kind { Activity, State, Param };
    Kind kind = Kind::Activity;
    std::string object_name;  // empty for Param
    std::string name;
    bool operator==(const CoTRelation&) const = default;
};

struct CoTResponse {
    std::vector<CoTRelation> relations;
    std::string reasons;
    std::vector<dsl::Solution> solutions;
};

struct ModifyPayload {
    std::vector<dsl::PatchDirective> directives;
    std::optional<std::string> full_program;  // convenience output, cross-checked
};

// GenAbm/RectifyDefects yield program text, GenVerification predicate text.
using Payload = std::variant<std::string, CoTResponse, ModifyPayload>;

// Extracts the payload from raw generator output using the fenced-block
// conventions declared in every prompt. Prose outside blocks is ignored;
// absent or malformed blocks raise PayloadParseError.
Payload parse_response(PromptKind kind, const std::string& raw);

struct GeneratorResponse {
    PromptKind kind = PromptKind::GenAbm;
    std::string raw;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string generate_text(const PromptText& prompt) = 0;
    virtual const char* name() const = 0;
};

// Persists every generator interaction under <dir>/NN-<kind>.prompt.txt and
// NN-<kind>.response.txt; the prompt is on disk before the backend runs.
class RunLog {
public:
    RunLog() = default;
    explicit RunLog(std::filesystem::path dir);

    bool enabled() const { return !dir_.empty(); }
    const std::filesystem::path& dir() const { return dir_; }

    int begin(const PromptText& prompt);
    void finish(int id, const PromptText& prompt, const std::string& response);

private:
    std::filesystem::path dir_;
    int counter_ = 0;
    std::mutex mutex_;
};

GeneratorResponse generate(Backend& backend, const PromptText& prompt, RunLog* log = nullptr);

// Deterministic fixture-driven backend. Responses are resolved in order:
//   1. <dir>/<kind>/<digest>.txt            exact prompt match
//   2. <dir>/<kind>.<n>.txt                 n-th call of this kind (0-based)
//   3. RectifyDefects only: rule fallback driven by <dir>/rectify.json,
//      splicing fixture bodies into placeholder/missing activities of the
//      program embedded in the prompt
// and a FixtureMiss is raised when all three fail.
class MockBackend : public Backend {
public:
    explicit MockBackend(std::filesystem::path fixtures_dir);

    std::string generate_text(const PromptText& prompt) override;
    const char* name() const override { return "mock"; }

private:
    std::filesystem::path dir_;
    std::map<PromptKind, int> calls_;
    std::mutex mutex_;

    std::optional<std::string> rectify_fallback(const PromptText& prompt);
};

struct RemoteConfig {
    std::string endpoint;  // http://host:port/path
    std::string model;
    double timeout_s = 60.0;
    int max_retries = 2;
    int max_inflight = 4;
    std::string api_key_env = "SAGE_API_KEY";
};

// Plain HTTP JSON chat-completion client. Credentials come only from the
// environment and are never rendered into prompts or logs.
class RemoteBackend : public Backend {
public:
    explicit RemoteBackend(RemoteConfig config);
    ~RemoteBackend() override;

    std::string generate_text(const PromptText& prompt) override;
    const char* name() const override { return "remote"; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sage::gen
