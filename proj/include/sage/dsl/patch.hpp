#pragma once

#include <string>
#include <variant>
#include <vector>

#include "sage/dsl/ast.hpp"
#include "sage/error.hpp"

namespace sage::dsl {

// Structured program modifications. A solution is delivered as a patch, a
// short list of directives, rather than a free-form rewrite, so its effect
// on states/activities/schedule is mechanically inspectable.

struct AddState {
    std::string object_name;
    StateDecl decl;
    bool operator==(const AddState&) const = default;
};

struct RemoveState {
    std::string object_name;
    std::string state_name;
    bool operator==(const RemoveState&) const = default;
};

// Adds the activity or replaces its body when it already exists.
struct SetActivity {
    std::string object_name;
    std::string activity_name;
    std::vector<Statement> body;
    bool operator==(const SetActivity&) const = default;
};

struct RemoveActivity {
    std::string object_name;
    std::string activity_name;
    bool operator==(const RemoveActivity&) const = default;
};

struct AddScheduleStep {
    ScheduleStep step;
    bool operator==(const AddScheduleStep&) const = default;
};

struct RemoveScheduleStep {
    ScheduleKind kind = ScheduleKind::Do;
    std::string object_name;
    std::string activity_name;
    bool operator==(const RemoveScheduleStep&) const = default;
};

// Creates the parameter or overwrites its value.
struct SetParam {
    std::string name;
    ParamValue value;
    bool operator==(const SetParam&) const = default;
};

using PatchDirective = std::variant<AddState, RemoveState, SetActivity, RemoveActivity,
                                    AddScheduleStep, RemoveScheduleStep, SetParam>;

struct Solution {
    std::string title;
    std::vector<PatchDirective> directives;
    bool operator==(const Solution&) const = default;
};

class PatchParseError : public Error {
public:
    PatchParseError(std::string msg, int line_) : Error(std::move(msg)), line(line_) {}
    int line = 0;
};

class PatchApplyError : public Error {
public:
    using Error::Error;
};

// Both parsers use the DSL token grammar; see docs/dsl.md for the shapes.
std::vector<PatchDirective> parse_patch(std::string_view text);
std::vector<Solution> parse_solutions(std::string_view text);

std::string print_patch(const std::vector<PatchDirective>& directives);
std::string print_solutions(const std::vector<Solution>& solutions);

// Applies directives in order; the result is not re-verified here. Unknown
// objects and no-op removals are reported as PatchApplyError.
AbmProgram apply_patch(const AbmProgram& program, const std::vector<PatchDirective>& patch);

}  // namespace sage::dsl
