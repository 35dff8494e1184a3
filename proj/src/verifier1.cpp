#include "sage/verifier1.hpp"

#include <algorithm>
#include <functional>

#include <json.hpp>

#include "sage/dsl/parser.hpp"
#include "sage/dsl/printer.hpp"

namespace sage::verifier1 {

using dsl::AbmProgram;
using dsl::Expr;
using dsl::ObjectClass;
using dsl::Statement;

std::set<std::pair<std::string, std::string>> SliceResult::activities() const {
    std::set<std::pair<std::string, std::string>> out;
    for (const auto& [object, activity, path] : statements) out.emplace(object, activity);
    return out;
}

bool SliceResult::contains_activity(const std::string& object,
                                    const std::string& activity) const {
    for (const auto& [o, a, p] : statements)
        if (o == object && a == activity) return true;
    return false;
}

namespace {

bool body_has_todo(const std::vector<Statement>& body) {
    for (const auto& stmt : body) {
        bool found = std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, dsl::Todo>) {
                    return true;
                } else if constexpr (std::is_same_v<T, dsl::If>) {
                    return body_has_todo(node.then_body) || body_has_todo(node.else_body);
                } else if constexpr (std::is_same_v<T, dsl::ForNeighbor>) {
                    return body_has_todo(node.body);
                } else {
                    return false;
                }
            },
            stmt.node);
        if (found) return true;
    }
    return false;
}

bool body_has_effect(const std::vector<Statement>& body) {
    for (const auto& stmt : body) {
        bool found = std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, dsl::Assign> ||
                              std::is_same_v<T, dsl::RecordEvent>) {
                    return true;
                } else if constexpr (std::is_same_v<T, dsl::If>) {
                    return body_has_effect(node.then_body) || body_has_effect(node.else_body);
                } else if constexpr (std::is_same_v<T, dsl::ForNeighbor>) {
                    return body_has_effect(node.body);
                } else {
                    return false;
                }
            },
            stmt.node);
        if (found) return true;
    }
    return false;
}

const rep::ActivitySpec* find_declared_activity(const rep::ConceptualRepresentation* scenario,
                                                const std::string& object,
                                                const std::string& activity) {
    if (!scenario) return nullptr;
    const rep::ObjectSpec* obj = scenario->find_object(object);
    if (!obj) return nullptr;
    for (const auto& a : obj->activities)
        if (a.name == activity) return &a;
    return nullptr;
}

std::vector<Defect> lacking_details(const AbmProgram& program,
                                    const rep::ConceptualRepresentation* scenario) {
    std::vector<Defect> out;

    std::set<std::pair<std::string, std::string>> scheduled;
    for (const auto& step : program.schedule)
        scheduled.emplace(step.object_name, step.activity_name);

    for (const auto& obj : program.objects) {
        for (const auto& act : obj.activities) {
            std::optional<std::string> description;
            if (const auto* spec = find_declared_activity(scenario, obj.name, act.name))
                description = spec->description;

            if (act.body.empty()) {
                out.push_back(Defect::lacking(obj.name, act.name, "activity body is empty",
                                              description));
            } else if (body_has_todo(act.body)) {
                out.push_back(Defect::lacking(obj.name, act.name,
                                              "activity body is a placeholder", description));
            } else if (scheduled.count({obj.name, act.name}) && !body_has_effect(act.body)) {
                out.push_back(Defect::lacking(
                    obj.name, act.name,
                    "scheduled activity has no effect (writes no state, records no event)",
                    description));
            }
        }
    }

    if (scenario) {
        for (const auto& obj : scenario->objects) {
            const ObjectClass* cls = program.find_object(obj.name);
            for (const auto& act : obj.activities) {
                if (!cls || !cls->find_activity(act.name))
                    out.push_back(Defect::lacking(
                        obj.name, act.name,
                        "activity declared in the scenario is missing from the program",
                        act.description));
            }
        }
    }
    return out;
}

}  // namespace

std::vector<Defect> check_program(std::string_view source,
                                  const rep::ConceptualRepresentation* scenario) {
    dsl::ParseResult parsed = dsl::parse_program(source);
    std::vector<Defect> out = parsed.defects;  // already sorted by line
    if (parsed.program) {
        std::vector<Defect> lacking = lacking_details(*parsed.program, scenario);
        out.insert(out.end(), lacking.begin(), lacking.end());
    }
    return out;
}

std::vector<Defect> check_program(const AbmProgram& program,
                                  const rep::ConceptualRepresentation* scenario) {
    // Round-trip through canonical text so defect lines refer to the same
    // source a repair prompt would embed.
    return check_program(dsl::print_program(program), scenario);
}

std::string render_defect_report(const std::vector<Defect>& defects) {
    std::string out;
    for (const auto& d : defects) {
        if (d.kind == DefectKind::CompilationError) {
            out += "[" + std::to_string(d.line) + ", \"" + d.excerpt + "\", \"" + d.reason +
                   "\"]\n";
        } else {
            out += "- lacking detail " + d.object_name + "." + d.activity_name + ": " + d.reason;
            if (d.activity_description)
                out += " (description: \"" + *d.activity_description + "\")";
            out += "\n";
        }
    }
    return out;
}

std::string defects_to_json(const std::vector<Defect>& defects) {
    std::string out = "[";
    bool first = true;
    for (const auto& d : defects) {
        nlohmann::json j;
        if (d.kind == DefectKind::CompilationError) {
            j["kind"] = "compilation_error";
            j["line"] = d.line;
            j["excerpt"] = d.excerpt;
        } else {
            j["kind"] = "lacking_detail";
            j["object"] = d.object_name;
            j["activity"] = d.activity_name;
            if (d.activity_description) j["description"] = *d.activity_description;
        }
        j["reason"] = d.reason;
        out += first ? "\n" : ",\n";
        out += j.dump();
        first = false;
    }
    out += first ? "]" : "\n]";
    return out;
}

gen::PromptText build_rectification_prompt(std::string_view source,
                                           const std::vector<Defect>& defects) {
    if (defects.empty()) throw EmptyDefectList("no defects to build a rectification prompt from");
    return gen::render_prompt(gen::PromptKind::RectifyDefects,
                              {{"program", std::string(source)},
                               {"defects", render_defect_report(defects)}});
}

namespace {

using StateKey = std::pair<std::string, std::string>;

struct Reads {
    std::set<StateKey> states;
    std::set<std::string> params;

    void merge(const Reads& other) {
        states.insert(other.states.begin(), other.states.end());
        params.insert(other.params.begin(), other.params.end());
    }
};

// Collects state/parameter reads of an expression. `self_obj` names the
// executing class, `other_obj` the innermost neighbor/aggregate binding.
void collect_reads(const Expr& e, const std::string& self_obj, const std::string& other_obj,
                   Reads& out) {
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, dsl::Ref>) {
                switch (node.scope) {
                    case dsl::RefScope::SelfState: out.states.insert({self_obj, node.name}); break;
                    case dsl::RefScope::OtherState:
                        out.states.insert({other_obj, node.name});
                        break;
                    case dsl::RefScope::Param: out.params.insert(node.name); break;
                }
            } else if constexpr (std::is_same_v<T, dsl::Binary>) {
                collect_reads(*node.lhs, self_obj, other_obj, out);
                collect_reads(*node.rhs, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::Not>) {
                collect_reads(*node.operand, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::Bernoulli>) {
                collect_reads(*node.probability, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::Uniform>) {
                collect_reads(*node.low, self_obj, other_obj, out);
                collect_reads(*node.high, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::RandInt>) {
                collect_reads(*node.low, self_obj, other_obj, out);
                collect_reads(*node.high, self_obj, other_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::CountNeighbors>) {
                collect_reads(*node.radius, self_obj, other_obj, out);
                collect_reads(*node.predicate, self_obj, self_obj, out);
            } else if constexpr (std::is_same_v<T, dsl::CountAll>) {
                collect_reads(*node.predicate, self_obj, node.object_name, out);
            } else if constexpr (std::is_same_v<T, dsl::SumAll>) {
                collect_reads(*node.value, self_obj, node.object_name, out);
            }
        },
        e.node);
}

struct Writer {
    std::string object;
    std::string activity;
    std::string path;
    std::vector<std::string> ancestors;  // enclosing compound statement paths
    StateKey target;
    Reads reads;  // RHS + enclosing guards + schedule conditions
};

class SliceBuilder {
public:
    explicit SliceBuilder(const AbmProgram& program) : program_(program) {
        // conditions guard every statement of the activity they schedule
        for (const auto& step : program.schedule)
            if (step.condition)
                collect_reads(*step.condition, step.object_name, step.object_name,
                              schedule_reads_[{step.object_name, step.activity_name}]);

        // only scheduled activities can run, so only they can influence
        std::set<std::pair<std::string, std::string>> scheduled;
        for (const auto& step : program.schedule)
            scheduled.emplace(step.object_name, step.activity_name);
        for (const auto& obj : program.objects)
            for (const auto& act : obj.activities)
                if (scheduled.count({obj.name, act.name}))
                    walk(obj, act, act.body, "", {}, {});
    }

    SliceResult build(const dsl::Recorder& recorder) {
        SliceResult slice;
        slice.metric = recorder.metric_name;
        Reads seed;
        collect_reads(recorder.expr, "", "", seed);
        slice.parameters = seed.params;
        slice.states = seed.states;

        bool grew = true;
        while (grew) {
            grew = false;
            for (const auto& w : writers_) {
                if (!slice.states.count(w.target)) continue;
                auto key = std::make_tuple(w.object, w.activity, w.path);
                if (slice.statements.count(key)) continue;
                slice.statements.insert(key);
                for (const auto& anc : w.ancestors)
                    slice.statements.insert({w.object, w.activity, anc});
                for (const auto& s : w.reads.states)
                    if (slice.states.insert(s).second) grew = true;
                slice.parameters.insert(w.reads.params.begin(), w.reads.params.end());
                grew = true;
            }
        }
        return slice;
    }

private:
    const AbmProgram& program_;
    std::vector<Writer> writers_;
    std::map<std::pair<std::string, std::string>, Reads> schedule_reads_;

    void walk(const ObjectClass& obj, const dsl::Activity& act,
              const std::vector<Statement>& body, const std::string& prefix, Reads guards,
              std::vector<std::string> ancestors) {
        for (std::size_t i = 0; i < body.size(); ++i) {
            std::string path = prefix.empty() ? std::to_string(i) : prefix + "." + std::to_string(i);
            const Statement& stmt = body[i];
            std::visit(
                [&](const auto& node) {
                    using T = std::decay_t<decltype(node)>;
                    if constexpr (std::is_same_v<T, dsl::Assign>) {
                        Writer w;
                        w.object = obj.name;
                        w.activity = act.name;
                        w.path = path;
                        w.ancestors = ancestors;
                        w.target = {obj.name, node.state_name};
                        w.reads = guards;
                        collect_reads(node.value, obj.name, obj.name, w.reads);
                        auto it = schedule_reads_.find({obj.name, act.name});
                        if (it != schedule_reads_.end()) w.reads.merge(it->second);
                        writers_.push_back(std::move(w));
                    } else if constexpr (std::is_same_v<T, dsl::If>) {
                        Reads inner = guards;
                        collect_reads(node.condition, obj.name, obj.name, inner);
                        auto anc = ancestors;
                        anc.push_back(path);
                        walk(obj, act, node.then_body, path, inner, anc);
                        walk(obj, act, node.else_body, path + ".e", inner, anc);
                    } else if constexpr (std::is_same_v<T, dsl::ForNeighbor>) {
                        Reads inner = guards;
                        collect_reads(node.radius, obj.name, obj.name, inner);
                        auto anc = ancestors;
                        anc.push_back(path);
                        walk(obj, act, node.body, path, inner, anc);
                    }
                },
                stmt.node);
        }
    }
};

}  // namespace

SliceResult backward_slice(const AbmProgram& program, const std::string& metric) {
    const dsl::Recorder* recorder = program.find_recorder(metric);
    if (!recorder) throw UnknownMetric("unknown metric \"" + metric + "\"");
    SliceBuilder builder(program);
    return builder.build(*recorder);
}

}  // namespace sage::verifier1
