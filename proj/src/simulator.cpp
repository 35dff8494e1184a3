#include "sage/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <json.hpp>

#include "sage/dsl/parser.hpp"
#include "sage/dsl/printer.hpp"

namespace sage::sim {

using dsl::AbmProgram;
using dsl::Expr;
using dsl::ObjectClass;
using dsl::Statement;
using dsl::ValueType;

namespace {

struct Instance {
    int id = 0;
    std::int64_t x = 0, y = 0;
    std::vector<Value> states;  // parallel to the class state_decls
};

struct ClassRuntime {
    const ObjectClass* decl = nullptr;
    std::vector<Instance> instances;

    int state_index(const std::string& name) const {
        for (std::size_t i = 0; i < decl->state_decls.size(); ++i)
            if (decl->state_decls[i].name == name) return static_cast<int>(i);
        return -1;
    }
};

double as_real(const Value& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
    return 0.0;
}

std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) +
                                     static_cast<std::uint64_t>(b));
}
std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) -
                                     static_cast<std::uint64_t>(b));
}
std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) *
                                     static_cast<std::uint64_t>(b));
}

class Simulation {
public:
    Simulation(const AbmProgram& program, std::int64_t seed, std::int64_t steps)
        : program_(program), rng_(static_cast<std::uint64_t>(seed)), seed_(seed), steps_(steps) {
        grid_w_ = program.init.grid_width;
        grid_h_ = program.init.grid_height;
    }

    SimulationTrace run() {
        setup();
        SimulationTrace trace;
        trace.seed = seed_;
        trace.steps = steps_;
        for (const auto& name : event_names_) trace.events[name] = {};
        auto metric_types = dsl::recorder_types(program_);
        for (const auto& r : program_.recorders)
            trace.series[r.metric_name].type = metric_types.at(r.metric_name);

        for (step_ = 0; step_ < steps_; ++step_) {
            for (const auto& name : event_names_) event_counts_[name] = 0;
            for (const auto& step : program_.schedule) run_schedule_step(step);
            record_metrics(trace);
            for (const auto& name : event_names_)
                trace.events[name].push_back(event_counts_[name]);
        }

        for (const auto& cls : classes_) {
            auto& snaps = trace.final_state[cls.decl->name];
            for (const auto& inst : cls.instances) {
                InstanceSnapshot s;
                s.id = inst.id;
                s.x = inst.x;
                s.y = inst.y;
                for (std::size_t i = 0; i < cls.decl->state_decls.size(); ++i)
                    s.states.emplace_back(cls.decl->state_decls[i].name, inst.states[i]);
                snaps.push_back(std::move(s));
            }
        }
        trace.activity_runs = activity_runs_;
        return trace;
    }

private:
    const AbmProgram& program_;
    Rng rng_;
    std::int64_t seed_;
    std::int64_t steps_;
    std::int64_t grid_w_ = 20, grid_h_ = 20;
    std::int64_t step_ = -1;
    std::vector<ClassRuntime> classes_;
    std::vector<std::string> event_names_;
    std::map<std::string, std::int64_t> event_counts_;
    std::map<std::string, std::int64_t> activity_runs_;

    // fault context
    std::string ctx_object_, ctx_activity_;

    [[noreturn]] void fault(const std::string& reason) {
        throw RuntimeFault(step_, ctx_object_, ctx_activity_, reason);
    }

    ClassRuntime* find_class(const std::string& name) {
        for (auto& c : classes_)
            if (c.decl->name == name) return &c;
        return nullptr;
    }

    void collect_event_names(const std::vector<Statement>& body) {
        for (const auto& stmt : body)
            std::visit(
                [&](const auto& node) {
                    using T = std::decay_t<decltype(node)>;
                    if constexpr (std::is_same_v<T, dsl::RecordEvent>) {
                        if (std::find(event_names_.begin(), event_names_.end(),
                                      node.event_name) == event_names_.end())
                            event_names_.push_back(node.event_name);
                    } else if constexpr (std::is_same_v<T, dsl::If>) {
                        collect_event_names(node.then_body);
                        collect_event_names(node.else_body);
                    } else if constexpr (std::is_same_v<T, dsl::ForNeighbor>) {
                        collect_event_names(node.body);
                    }
                },
                stmt.node);
    }

    std::int64_t resolve_count(const dsl::CountSpec& spec) {
        if (const auto* lit = std::get_if<dsl::IntLit>(&spec.count.node)) return lit->value;
        if (const auto* ref = std::get_if<dsl::Ref>(&spec.count.node))
            return static_cast<std::int64_t>(program_.parameters.at(ref->name).value);
        return 0;
    }

    Value default_value(dsl::StateType t) {
        switch (t) {
            case dsl::StateType::Bool: return false;
            case dsl::StateType::Int: return std::int64_t{0};
            case dsl::StateType::Real: return 0.0;
            case dsl::StateType::Position: return dsl::PosValue{};
        }
        return false;
    }

    void setup() {
        step_ = -1;
        for (const auto& obj : program_.objects) {
            classes_.push_back(ClassRuntime{&obj, {}});
            for (const auto& act : obj.activities) collect_event_names(act.body);
        }

        for (auto& cls : classes_) {
            ctx_object_ = cls.decl->name;
            ctx_activity_ = "<init>";
            std::int64_t count = 0;
            for (const auto& spec : program_.init.counts)
                if (spec.object_name == cls.decl->name) count = resolve_count(spec);
            bool rowmajor =
                program_.init.layout_for(cls.decl->name) == dsl::LayoutKind::RowMajor;
            for (std::int64_t i = 0; i < count; ++i) {
                Instance inst;
                inst.id = static_cast<int>(i);
                if (rowmajor) {
                    inst.x = i % grid_w_;
                    inst.y = (i / grid_w_) % grid_h_;
                } else {
                    inst.x = static_cast<std::int64_t>(rng_.bounded(grid_w_));
                    inst.y = static_cast<std::int64_t>(rng_.bounded(grid_h_));
                }
                for (const auto& decl : cls.decl->state_decls)
                    inst.states.push_back(default_value(decl.type));
                cls.instances.push_back(std::move(inst));
                Instance& placed = cls.instances.back();
                for (std::size_t s = 0; s < cls.decl->state_decls.size(); ++s)
                    placed.states[s] =
                        coerce(eval(cls.decl->state_decls[s].init, &cls, &placed, nullptr,
                                    nullptr),
                               cls.decl->state_decls[s].type);
            }
        }

        for (const auto& ov : program_.init.overrides) {
            ClassRuntime* cls = find_class(ov.object_name);
            ctx_object_ = ov.object_name;
            ctx_activity_ = "<init>";
            int idx = cls->state_index(ov.state_name);
            for (auto& inst : cls->instances)
                inst.states[idx] = coerce(eval(ov.value, cls, &inst, nullptr, nullptr),
                                          cls->decl->state_decls[idx].type);
        }
    }

    Value coerce(Value v, dsl::StateType target) {
        if (target == dsl::StateType::Real) {
            if (const auto* i = std::get_if<std::int64_t>(&v))
                return static_cast<double>(*i);
        }
        return v;
    }

    std::int64_t toroidal_delta(std::int64_t a, std::int64_t b, std::int64_t extent) const {
        std::int64_t d = std::abs(a - b) % extent;
        return std::min(d, extent - d);
    }

    std::int64_t chebyshev(const Instance& a, const Instance& b) const {
        return std::max(toroidal_delta(a.x, b.x, grid_w_), toroidal_delta(a.y, b.y, grid_h_));
    }

    void bump_activity(const std::string& object, const std::string& activity) {
        activity_runs_[object + "." + activity] += 1;
    }

    void run_schedule_step(const dsl::ScheduleStep& step) {
        ClassRuntime* cls = find_class(step.object_name);
        const dsl::Activity* act = cls->decl->find_activity(step.activity_name);
        ctx_object_ = step.object_name;
        ctx_activity_ = step.activity_name;

        const bool random = rep::is_random(step.kind);

        std::vector<int> order;
        if (step.kind == dsl::ScheduleKind::RandomConditionalDo) {
            // one filtering pass against the pre-activity state, then shuffle
            for (auto& inst : cls->instances)
                if (truthy(eval(*step.condition, cls, &inst, nullptr, nullptr)))
                    order.push_back(inst.id);
            shuffle(order, rng_);
        } else {
            for (const auto& inst : cls->instances) order.push_back(inst.id);
            if (random) shuffle(order, rng_);
        }

        for (int id : order) {
            Instance& inst = cls->instances[static_cast<std::size_t>(id)];
            if (step.kind == dsl::ScheduleKind::ConditionalDo) {
                // evaluated at this instance's moment of execution
                if (!truthy(eval(*step.condition, cls, &inst, nullptr, nullptr))) continue;
            }
            bump_activity(step.object_name, step.activity_name);
            exec_body(act->body, cls, &inst, nullptr, nullptr);
        }
    }

    bool truthy(const Value& v) { return std::get<bool>(v); }

    void record_metrics(SimulationTrace& trace) {
        for (const auto& r : program_.recorders) {
            ctx_object_ = "<recorder>";
            ctx_activity_ = r.metric_name;
            Value v = eval(r.expr, nullptr, nullptr, nullptr, nullptr);
            trace.series[r.metric_name].values.push_back(as_real(v));
        }
    }

    void exec_body(const std::vector<Statement>& body, ClassRuntime* cls, Instance* self,
                   ClassRuntime* other_cls, Instance* other) {
        for (const auto& stmt : body) exec_statement(stmt, cls, self, other_cls, other);
    }

    void exec_statement(const Statement& stmt, ClassRuntime* cls, Instance* self,
                        ClassRuntime* other_cls, Instance* other) {
        std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, dsl::Assign>) {
                    Value v = eval(node.value, cls, self, other_cls, other);
                    if (node.target_scope == dsl::RefScope::SelfState) {
                        int idx = cls->state_index(node.state_name);
                        self->states[static_cast<std::size_t>(idx)] =
                            coerce(std::move(v), cls->decl->state_decls[idx].type);
                    } else {
                        int idx = other_cls->state_index(node.state_name);
                        other->states[static_cast<std::size_t>(idx)] =
                            coerce(std::move(v), other_cls->decl->state_decls[idx].type);
                    }
                } else if constexpr (std::is_same_v<T, dsl::If>) {
                    if (truthy(eval(node.condition, cls, self, other_cls, other)))
                        exec_body(node.then_body, cls, self, other_cls, other);
                    else
                        exec_body(node.else_body, cls, self, other_cls, other);
                } else if constexpr (std::is_same_v<T, dsl::ForNeighbor>) {
                    double radius = as_real(eval(node.radius, cls, self, other_cls, other));
                    for (auto& cand : cls->instances) {
                        if (cand.id == self->id) continue;
                        if (static_cast<double>(chebyshev(*self, cand)) > radius) continue;
                        exec_body(node.body, cls, self, cls, &cand);
                    }
                } else if constexpr (std::is_same_v<T, dsl::RecordEvent>) {
                    if (step_ >= 0) event_counts_[node.event_name] += 1;
                } else {
                    static_assert(std::is_same_v<T, dsl::Todo>);
                    // placeholder body: no behavior
                }
            },
            stmt.node);
    }

    Value eval(const Expr& e, ClassRuntime* cls, Instance* self, ClassRuntime* other_cls,
               Instance* other) {
        return std::visit(
            [&](const auto& node) -> Value {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, dsl::BoolLit>) {
                    return node.value;
                } else if constexpr (std::is_same_v<T, dsl::IntLit>) {
                    return node.value;
                } else if constexpr (std::is_same_v<T, dsl::RealLit>) {
                    return node.value;
                } else if constexpr (std::is_same_v<T, dsl::StringLit>) {
                    fault("string value in a runtime expression");
                } else if constexpr (std::is_same_v<T, dsl::PosLit>) {
                    return node.value;
                } else if constexpr (std::is_same_v<T, dsl::Ref>) {
                    switch (node.scope) {
                        case dsl::RefScope::SelfState: {
                            int idx = cls->state_index(node.name);
                            return self->states[static_cast<std::size_t>(idx)];
                        }
                        case dsl::RefScope::OtherState: {
                            int idx = other_cls->state_index(node.name);
                            return other->states[static_cast<std::size_t>(idx)];
                        }
                        case dsl::RefScope::Param: {
                            const auto& p = program_.parameters.at(node.name);
                            if (p.integer)
                                return static_cast<std::int64_t>(p.value);
                            return p.value;
                        }
                    }
                    return false;
                } else if constexpr (std::is_same_v<T, dsl::Binary>) {
                    return eval_binary(node, cls, self, other_cls, other);
                } else if constexpr (std::is_same_v<T, dsl::Not>) {
                    return !std::get<bool>(eval(*node.operand, cls, self, other_cls, other));
                } else if constexpr (std::is_same_v<T, dsl::Bernoulli>) {
                    double p = as_real(eval(*node.probability, cls, self, other_cls, other));
                    if (!(p >= 0.0 && p <= 1.0))
                        fault("invalid probability " + dsl::format_real(p));
                    return rng_.real01() < p;
                } else if constexpr (std::is_same_v<T, dsl::Uniform>) {
                    double lo = as_real(eval(*node.low, cls, self, other_cls, other));
                    double hi = as_real(eval(*node.high, cls, self, other_cls, other));
                    if (!(lo <= hi)) fault("invalid uniform range");
                    return lo + rng_.real01() * (hi - lo);
                } else if constexpr (std::is_same_v<T, dsl::RandInt>) {
                    auto lo = std::get<std::int64_t>(
                        eval(*node.low, cls, self, other_cls, other));
                    auto hi = std::get<std::int64_t>(
                        eval(*node.high, cls, self, other_cls, other));
                    if (lo > hi) fault("empty randint range");
                    return wrap_add(lo, static_cast<std::int64_t>(rng_.bounded(
                                            static_cast<std::uint64_t>(hi - lo + 1))));
                } else if constexpr (std::is_same_v<T, dsl::CountNeighbors>) {
                    double radius = as_real(eval(*node.radius, cls, self, other_cls, other));
                    std::int64_t count = 0;
                    for (auto& cand : cls->instances) {
                        if (cand.id == self->id) continue;
                        if (static_cast<double>(chebyshev(*self, cand)) > radius) continue;
                        if (std::get<bool>(eval(*node.predicate, cls, self, cls, &cand)))
                            ++count;
                    }
                    return count;
                } else if constexpr (std::is_same_v<T, dsl::CountAll>) {
                    ClassRuntime* target = find_class(node.object_name);
                    std::int64_t count = 0;
                    for (auto& cand : target->instances)
                        if (std::get<bool>(eval(*node.predicate, cls, self, target, &cand)))
                            ++count;
                    return count;
                } else if constexpr (std::is_same_v<T, dsl::SumAll>) {
                    ClassRuntime* target = find_class(node.object_name);
                    std::int64_t isum = 0;
                    double rsum = 0.0;
                    bool real = false;
                    for (auto& cand : target->instances) {
                        Value v = eval(*node.value, cls, self, target, &cand);
                        if (const auto* i = std::get_if<std::int64_t>(&v)) {
                            isum = wrap_add(isum, *i);
                            rsum += static_cast<double>(*i);
                        } else {
                            real = true;
                            rsum += std::get<double>(v);
                        }
                    }
                    if (real) return rsum;
                    return isum;
                } else {
                    static_assert(std::is_same_v<T, dsl::Distance>);
                    return static_cast<double>(chebyshev(*self, *other));
                }
            },
            e.node);
    }

    Value eval_binary(const dsl::Binary& node, ClassRuntime* cls, Instance* self,
                      ClassRuntime* other_cls, Instance* other) {
        using dsl::BinaryOp;
        // short-circuit forms first; evaluation order is load-bearing for
        // reproducibility because operands may draw randomness
        if (node.op == BinaryOp::And) {
            if (!std::get<bool>(eval(*node.lhs, cls, self, other_cls, other))) return false;
            return std::get<bool>(eval(*node.rhs, cls, self, other_cls, other));
        }
        if (node.op == BinaryOp::Or) {
            if (std::get<bool>(eval(*node.lhs, cls, self, other_cls, other))) return true;
            return std::get<bool>(eval(*node.rhs, cls, self, other_cls, other));
        }

        Value lv = eval(*node.lhs, cls, self, other_cls, other);
        Value rv = eval(*node.rhs, cls, self, other_cls, other);

        const auto* li = std::get_if<std::int64_t>(&lv);
        const auto* ri = std::get_if<std::int64_t>(&rv);
        bool both_int = li && ri;

        switch (node.op) {
            case BinaryOp::Add:
                if (both_int) return wrap_add(*li, *ri);
                return as_real(lv) + as_real(rv);
            case BinaryOp::Sub:
                if (both_int) return wrap_sub(*li, *ri);
                return as_real(lv) - as_real(rv);
            case BinaryOp::Mul:
                if (both_int) return wrap_mul(*li, *ri);
                return as_real(lv) * as_real(rv);
            case BinaryOp::Div: {
                double denom = as_real(rv);
                if (denom == 0.0) fault("division by zero");
                return as_real(lv) / denom;
            }
            case BinaryOp::Eq:
            case BinaryOp::Ne: {
                bool eq;
                if (const auto* lb = std::get_if<bool>(&lv)) {
                    eq = *lb == std::get<bool>(rv);
                } else if (const auto* lp = std::get_if<dsl::PosValue>(&lv)) {
                    eq = *lp == std::get<dsl::PosValue>(rv);
                } else if (both_int) {
                    eq = *li == *ri;
                } else {
                    eq = as_real(lv) == as_real(rv);
                }
                return node.op == BinaryOp::Eq ? eq : !eq;
            }
            case BinaryOp::Lt:
                return both_int ? *li < *ri : as_real(lv) < as_real(rv);
            case BinaryOp::Le:
                return both_int ? *li <= *ri : as_real(lv) <= as_real(rv);
            case BinaryOp::Ge:
                return both_int ? *li >= *ri : as_real(lv) >= as_real(rv);
            case BinaryOp::Gt:
                return both_int ? *li > *ri : as_real(lv) > as_real(rv);
            default: fault("unexpected operator");
        }
    }
};

nlohmann::ordered_json value_to_json(const Value& v) {
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    if (const auto* d = std::get_if<double>(&v)) return *d;
    const auto& p = std::get<dsl::PosValue>(v);
    return nlohmann::ordered_json::array({p.x, p.y});
}

const char* metric_type_name(ValueType t) {
    switch (t) {
        case ValueType::Bool: return "bool";
        case ValueType::Int: return "int";
        default: return "real";
    }
}

}  // namespace

SimulationTrace simulate(const AbmProgram& program, std::int64_t seed, std::int64_t steps) {
    Simulation sim(program, seed, steps);
    return sim.run();
}

std::map<std::string, std::vector<double>> snapshot_metrics(const SimulationTrace& trace) {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [name, series] : trace.series) out[name] = series.values;
    return out;
}

std::string trace_to_string(const SimulationTrace& trace) {
    nlohmann::ordered_json j;
    j["seed"] = trace.seed;
    j["steps"] = trace.steps;
    j["series"] = nlohmann::ordered_json::object();
    for (const auto& [name, series] : trace.series) {
        nlohmann::ordered_json s;
        s["type"] = metric_type_name(series.type);
        auto& values = s["values"] = nlohmann::ordered_json::array();
        for (double v : series.values) {
            if (series.type == ValueType::Real)
                values.push_back(v);
            else
                values.push_back(static_cast<std::int64_t>(std::llround(v)));
        }
        j["series"][name] = std::move(s);
    }
    j["events"] = nlohmann::ordered_json::object();
    for (const auto& [name, counts] : trace.events) j["events"][name] = counts;
    j["final_state"] = nlohmann::ordered_json::object();
    for (const auto& [cls, snaps] : trace.final_state) {
        auto& arr = j["final_state"][cls] = nlohmann::ordered_json::array();
        for (const auto& inst : snaps) {
            nlohmann::ordered_json s;
            s["id"] = inst.id;
            s["pos"] = nlohmann::ordered_json::array({inst.x, inst.y});
            s["states"] = nlohmann::ordered_json::object();
            for (const auto& [name, value] : inst.states)
                s["states"][name] = value_to_json(value);
            arr.push_back(std::move(s));
        }
    }
    return j.dump(2) + "\n";
}

SimulationTrace trace_from_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(std::string("bad trace document: ") + e.what());
    }
    SimulationTrace trace;
    trace.seed = j.value("seed", std::int64_t{0});
    trace.steps = j.value("steps", std::int64_t{0});
    if (j.contains("series"))
        for (auto it = j["series"].begin(); it != j["series"].end(); ++it) {
            MetricSeries s;
            std::string type = it.value().value("type", std::string("real"));
            s.type = type == "int" ? ValueType::Int
                                   : (type == "bool" ? ValueType::Bool : ValueType::Real);
            for (const auto& v : it.value().at("values")) s.values.push_back(v.get<double>());
            trace.series[it.key()] = std::move(s);
        }
    if (j.contains("events"))
        for (auto it = j["events"].begin(); it != j["events"].end(); ++it)
            trace.events[it.key()] = it.value().get<std::vector<std::int64_t>>();
    return trace;
}

}  // namespace sage::sim
