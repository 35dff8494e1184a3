#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sage/error.hpp"

namespace sage::rep {

enum class StateType { Bool, Int, Real, Position };

const char* to_string(StateType t);
std::optional<StateType> state_type_from_string(const std::string& s);

struct StateSpec {
    std::string name;
    std::string description;
    StateType declared_type = StateType::Bool;
    bool operator==(const StateSpec&) const = default;
};

struct ActivitySpec {
    std::string name;
    std::string description;
    bool operator==(const ActivitySpec&) const = default;
};

struct ObjectSpec {
    std::string name;
    std::vector<StateSpec> states;
    std::vector<ActivitySpec> activities;
    bool operator==(const ObjectSpec&) const = default;
};

enum class ScheduleKind { Do, RandomDo, ConditionalDo, RandomConditionalDo };

const char* to_string(ScheduleKind k);
std::optional<ScheduleKind> schedule_kind_from_string(const std::string& s);
bool is_conditional(ScheduleKind k);
bool is_random(ScheduleKind k);

struct ScheduleDirective {
    ScheduleKind kind = ScheduleKind::Do;
    std::string object_name;
    std::string activity_name;
    std::optional<std::string> condition;  // verbatim text, parsed later by the dsl
    bool operator==(const ScheduleDirective&) const = default;
};

// Semi-structured scenario description: objects with states/activities,
// scheduling directives, and global numeric constants. Declaration order
// of objects, states, activities and schedule entries is significant and
// preserved; parameters are kept sorted by name.
struct ConceptualRepresentation {
    std::vector<ObjectSpec> objects;
    std::vector<ScheduleDirective> scheduling;
    std::map<std::string, double> parameters;
    bool operator==(const ConceptualRepresentation&) const = default;

    const ObjectSpec* find_object(const std::string& name) const;
};

struct Criterion {
    std::string variable_name;
    std::string variable_example;  // literal sample rendered as JSON text
    std::string requirement;
    bool operator==(const Criterion&) const = default;
};

struct ObjectiveRepresentation {
    std::string problem;
    std::vector<Criterion> criteria;
    bool operator==(const ObjectiveRepresentation&) const = default;
};

// Parses a JSON scenario document. Throws SyntaxError on malformed JSON and
// SchemaError (with the offending path) on schema violations: unknown or
// missing fields, duplicate names, dangling schedule references.
ConceptualRepresentation parse_conceptual(const std::string& document);

// Parses a JSON objective document (problem text plus judgment criteria).
ObjectiveRepresentation parse_objective(const std::string& document);

// Canonical JSON rendering; parse_conceptual(render_conceptual(r)) == r.
std::string render_conceptual(const ConceptualRepresentation& r);

std::string render_objective(const ObjectiveRepresentation& o);

}  // namespace sage::rep
