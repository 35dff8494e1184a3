#include <algorithm>
#include <set>
#include <string>

#include "sage/dsl/parser.hpp"

namespace sage::dsl {

const char* to_string(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
        case BinaryOp::Lt: return "<";
        case BinaryOp::Le: return "<=";
        case BinaryOp::Eq: return "==";
        case BinaryOp::Ne: return "!=";
        case BinaryOp::Ge: return ">=";
        case BinaryOp::Gt: return ">";
        case BinaryOp::And: return "and";
        case BinaryOp::Or: return "or";
    }
    return "?";
}

bool is_arith(BinaryOp op) {
    return op == BinaryOp::Add || op == BinaryOp::Sub || op == BinaryOp::Mul ||
           op == BinaryOp::Div;
}

bool is_cmp(BinaryOp op) {
    return op == BinaryOp::Lt || op == BinaryOp::Le || op == BinaryOp::Eq ||
           op == BinaryOp::Ne || op == BinaryOp::Ge || op == BinaryOp::Gt;
}

bool is_bool_op(BinaryOp op) { return op == BinaryOp::And || op == BinaryOp::Or; }

const char* to_string(ValueType t) {
    switch (t) {
        case ValueType::Bool: return "bool";
        case ValueType::Int: return "int";
        case ValueType::Real: return "real";
        case ValueType::Position: return "position";
        case ValueType::Str: return "string";
    }
    return "?";
}

ValueType value_type_of(StateType t) {
    switch (t) {
        case StateType::Bool: return ValueType::Bool;
        case StateType::Int: return ValueType::Int;
        case StateType::Real: return ValueType::Real;
        case StateType::Position: return ValueType::Position;
    }
    return ValueType::Bool;
}

bool is_numeric(ValueType t) { return t == ValueType::Int || t == ValueType::Real; }

const StateDecl* ObjectClass::find_state(const std::string& n) const {
    for (const auto& s : state_decls)
        if (s.name == n) return &s;
    return nullptr;
}

const Activity* ObjectClass::find_activity(const std::string& n) const {
    for (const auto& a : activities)
        if (a.name == n) return &a;
    return nullptr;
}

Activity* ObjectClass::find_activity(const std::string& n) {
    for (auto& a : activities)
        if (a.name == n) return &a;
    return nullptr;
}

const ObjectClass* AbmProgram::find_object(const std::string& n) const {
    for (const auto& o : objects)
        if (o.name == n) return &o;
    return nullptr;
}

ObjectClass* AbmProgram::find_object(const std::string& n) {
    for (auto& o : objects)
        if (o.name == n) return &o;
    return nullptr;
}

const Recorder* AbmProgram::find_recorder(const std::string& n) const {
    for (const auto& r : recorders)
        if (r.metric_name == n) return &r;
    return nullptr;
}

namespace {

struct TypeContext {
    const ObjectClass* self_class = nullptr;
    const ObjectClass* other_class = nullptr;
    bool allow_random = true;
    bool allow_aggregates = true;  // count_all
    bool allow_sum_all = false;    // recorders only

    TypeContext with_other(const ObjectClass* cls) const {
        TypeContext c = *this;
        c.other_class = cls;
        return c;
    }
};

class Analyzer {
public:
    Analyzer(const AbmProgram& program, std::vector<Defect>& defects)
        : program_(program), defects_(defects) {}

    void run() {
        check_declarations();
        check_objects();
        check_schedule();
        check_init();
        check_recorders();
    }

    // nullopt means a defect was already reported under this expression;
    // callers stay silent to avoid error cascades.
    std::optional<ValueType> type_expr(const Expr& e, const TypeContext& ctx) {
        return std::visit([&](const auto& node) { return type_node(node, e.line, ctx); },
                          e.node);
    }

private:
    const AbmProgram& program_;
    std::vector<Defect>& defects_;

    std::optional<ValueType> fail(int line, const std::string& excerpt,
                                  const std::string& reason) {
        defects_.push_back(Defect::compilation(line, excerpt, reason));
        return std::nullopt;
    }

    std::optional<ValueType> type_node(const BoolLit&, int, const TypeContext&) {
        return ValueType::Bool;
    }
    std::optional<ValueType> type_node(const IntLit&, int, const TypeContext&) {
        return ValueType::Int;
    }
    std::optional<ValueType> type_node(const RealLit&, int, const TypeContext&) {
        return ValueType::Real;
    }
    std::optional<ValueType> type_node(const StringLit&, int, const TypeContext&) {
        return ValueType::Str;
    }
    std::optional<ValueType> type_node(const PosLit&, int, const TypeContext&) {
        return ValueType::Position;
    }

    std::optional<ValueType> type_node(const Ref& ref, int line, const TypeContext& ctx) {
        switch (ref.scope) {
            case RefScope::SelfState: {
                if (!ctx.self_class)
                    return fail(line, "self." + ref.name, "self is not available here");
                const StateDecl* s = ctx.self_class->find_state(ref.name);
                if (!s)
                    return fail(line, ref.name,
                                "unknown state of object " + ctx.self_class->name);
                return value_type_of(s->type);
            }
            case RefScope::OtherState: {
                if (!ctx.other_class)
                    return fail(line, "other." + ref.name,
                                "other is only available inside neighbor or aggregate scopes");
                const StateDecl* s = ctx.other_class->find_state(ref.name);
                if (!s)
                    return fail(line, ref.name,
                                "unknown state of object " + ctx.other_class->name);
                return value_type_of(s->type);
            }
            case RefScope::Param: {
                auto it = program_.parameters.find(ref.name);
                if (it == program_.parameters.end())
                    return fail(line, ref.name, "unknown parameter");
                return it->second.integer ? ValueType::Int : ValueType::Real;
            }
        }
        return std::nullopt;
    }

    std::optional<ValueType> type_node(const Binary& b, int line, const TypeContext& ctx) {
        auto lt = type_expr(*b.lhs, ctx);
        auto rt = type_expr(*b.rhs, ctx);
        if (!lt || !rt) return std::nullopt;
        std::string op = to_string(b.op);
        if (is_arith(b.op)) {
            if (!is_numeric(*lt) || !is_numeric(*rt))
                return fail(line, op,
                            "operator " + op + " needs numeric operands, got " +
                                to_string(*lt) + " and " + to_string(*rt));
            if (b.op == BinaryOp::Div) return ValueType::Real;
            return (*lt == ValueType::Int && *rt == ValueType::Int) ? ValueType::Int
                                                                    : ValueType::Real;
        }
        if (is_bool_op(b.op)) {
            if (*lt != ValueType::Bool || *rt != ValueType::Bool)
                return fail(line, op, "operator " + op + " needs bool operands");
            return ValueType::Bool;
        }
        // comparison
        bool ok = (is_numeric(*lt) && is_numeric(*rt));
        if (b.op == BinaryOp::Eq || b.op == BinaryOp::Ne)
            ok = ok || (*lt == *rt && (*lt == ValueType::Bool || *lt == ValueType::Position));
        if (!ok)
            return fail(line, op,
                        "type mismatch: cannot compare " + std::string(to_string(*lt)) +
                            " with " + to_string(*rt));
        return ValueType::Bool;
    }

    std::optional<ValueType> type_node(const Not& n, int line, const TypeContext& ctx) {
        auto t = type_expr(*n.operand, ctx);
        if (!t) return std::nullopt;
        if (*t != ValueType::Bool) return fail(line, "not", "operator not needs a bool operand");
        return ValueType::Bool;
    }

    std::optional<ValueType> check_random(int line, const std::string& what,
                                          const TypeContext& ctx) {
        if (!ctx.allow_random)
            return fail(line, what, what + " is not allowed in this context");
        return ValueType::Bool;  // caller overrides
    }

    std::optional<ValueType> type_node(const Bernoulli& b, int line, const TypeContext& ctx) {
        if (!check_random(line, "bernoulli", ctx)) return std::nullopt;
        auto t = type_expr(*b.probability, ctx);
        if (!t) return std::nullopt;
        if (!is_numeric(*t))
            return fail(line, "bernoulli",
                        "type mismatch: bernoulli expects a real probability, got " +
                            std::string(to_string(*t)));
        return ValueType::Bool;
    }

    std::optional<ValueType> type_node(const Uniform& u, int line, const TypeContext& ctx) {
        if (!check_random(line, "uniform", ctx)) return std::nullopt;
        auto lo = type_expr(*u.low, ctx);
        auto hi = type_expr(*u.high, ctx);
        if (!lo || !hi) return std::nullopt;
        if (!is_numeric(*lo) || !is_numeric(*hi))
            return fail(line, "uniform", "type mismatch: uniform expects numeric bounds");
        return ValueType::Real;
    }

    std::optional<ValueType> type_node(const RandInt& r, int line, const TypeContext& ctx) {
        if (!check_random(line, "randint", ctx)) return std::nullopt;
        auto lo = type_expr(*r.low, ctx);
        auto hi = type_expr(*r.high, ctx);
        if (!lo || !hi) return std::nullopt;
        if (*lo != ValueType::Int || *hi != ValueType::Int)
            return fail(line, "randint", "type mismatch: randint expects int bounds");
        return ValueType::Int;
    }

    std::optional<ValueType> type_node(const CountNeighbors& c, int line,
                                       const TypeContext& ctx) {
        if (!ctx.self_class)
            return fail(line, "count_neighbors", "count_neighbors needs an executing instance");
        auto rt = type_expr(*c.radius, ctx);
        if (rt && !is_numeric(*rt))
            fail(line, "count_neighbors", "neighborhood radius must be numeric");
        auto pt = type_expr(*c.predicate, ctx.with_other(ctx.self_class));
        if (pt && *pt != ValueType::Bool)
            return fail(line, "count_neighbors", "neighbor predicate must be bool");
        if (!rt || !pt) return std::nullopt;
        return ValueType::Int;
    }

    std::optional<ValueType> type_node(const CountAll& c, int line, const TypeContext& ctx) {
        if (!ctx.allow_aggregates)
            return fail(line, "count_all", "count_all is not allowed in this context");
        const ObjectClass* cls = program_.find_object(c.object_name);
        if (!cls) return fail(line, c.object_name, "unknown object");
        auto pt = type_expr(*c.predicate, ctx.with_other(cls));
        if (pt && *pt != ValueType::Bool)
            return fail(line, "count_all", "count_all predicate must be bool");
        if (!pt) return std::nullopt;
        return ValueType::Int;
    }

    std::optional<ValueType> type_node(const SumAll& s, int line, const TypeContext& ctx) {
        if (!ctx.allow_sum_all)
            return fail(line, "sum_all", "sum_all is only available in recorder expressions");
        const ObjectClass* cls = program_.find_object(s.object_name);
        if (!cls) return fail(line, s.object_name, "unknown object");
        auto vt = type_expr(*s.value, ctx.with_other(cls));
        if (!vt) return std::nullopt;
        if (!is_numeric(*vt))
            return fail(line, "sum_all", "sum_all expects a numeric expression");
        return *vt;
    }

    std::optional<ValueType> type_node(const Distance&, int line, const TypeContext& ctx) {
        if (!ctx.self_class || !ctx.other_class)
            return fail(line, "distance",
                        "distance(self, other) needs both an executing instance and a neighbor");
        return ValueType::Real;
    }

    void check_assignable(int line, const std::string& name, StateType target,
                          std::optional<ValueType> value) {
        if (!value) return;
        ValueType t = value_type_of(target);
        bool ok = (*value == t) || (t == ValueType::Real && *value == ValueType::Int);
        if (!ok)
            fail(line, name,
                 "type mismatch: cannot assign " + std::string(to_string(*value)) + " to " +
                     to_string(t) + " state " + name);
    }

    void check_statements(const std::vector<Statement>& body, const TypeContext& ctx) {
        for (const auto& stmt : body) check_statement(stmt, ctx);
    }

    void check_statement(const Statement& stmt, const TypeContext& ctx) {
        std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, Assign>) {
                    const ObjectClass* cls = nullptr;
                    if (node.target_scope == RefScope::SelfState) {
                        cls = ctx.self_class;
                    } else {
                        cls = ctx.other_class;
                        if (!cls) {
                            fail(stmt.line, "other." + node.state_name,
                                 "assignment to other is only valid inside for_neighbor");
                            return;
                        }
                    }
                    if (!cls) {
                        fail(stmt.line, node.state_name, "self is not available here");
                        return;
                    }
                    const StateDecl* s = cls->find_state(node.state_name);
                    if (!s) {
                        fail(stmt.line, node.state_name,
                             "unknown state of object " + cls->name);
                        type_expr(node.value, ctx);
                        return;
                    }
                    check_assignable(stmt.line, node.state_name, s->type,
                                     type_expr(node.value, ctx));
                } else if constexpr (std::is_same_v<T, If>) {
                    auto ct = type_expr(node.condition, ctx);
                    if (ct && *ct != ValueType::Bool)
                        fail(stmt.line, "if", "if condition must be bool");
                    check_statements(node.then_body, ctx);
                    check_statements(node.else_body, ctx);
                } else if constexpr (std::is_same_v<T, ForNeighbor>) {
                    if (!ctx.self_class) {
                        fail(stmt.line, "for_neighbor",
                             "for_neighbor needs an executing instance");
                        return;
                    }
                    auto rt = type_expr(node.radius, ctx);
                    if (rt && !is_numeric(*rt))
                        fail(stmt.line, "for_neighbor", "neighborhood radius must be numeric");
                    check_statements(node.body, ctx.with_other(ctx.self_class));
                } else if constexpr (std::is_same_v<T, RecordEvent>) {
                    // event names are declared by use
                } else {
                    static_assert(std::is_same_v<T, Todo>);
                }
            },
            stmt.node);
    }

    void check_declarations() {
        std::set<std::string> names;
        for (const auto& obj : program_.objects) {
            if (!names.insert(obj.name).second)
                fail(obj.line, obj.name, "duplicate object \"" + obj.name + "\"");
            std::set<std::string> states, activities;
            for (const auto& s : obj.state_decls)
                if (!states.insert(s.name).second)
                    fail(s.line, s.name,
                         "duplicate state \"" + s.name + "\" in object " + obj.name);
            for (const auto& a : obj.activities)
                if (!activities.insert(a.name).second)
                    fail(a.line, a.name,
                         "duplicate activity \"" + a.name + "\" in object " + obj.name);
        }
    }

    void check_objects() {
        for (const auto& obj : program_.objects) {
            TypeContext init_ctx;  // defaults may draw randomness but see no instances
            init_ctx.allow_aggregates = false;
            for (const auto& s : obj.state_decls)
                check_assignable(s.line, s.name, s.type, type_expr(s.init, init_ctx));

            TypeContext body_ctx;
            body_ctx.self_class = &obj;
            for (const auto& a : obj.activities) check_statements(a.body, body_ctx);
        }
    }

    void check_schedule() {
        for (const auto& step : program_.schedule) {
            const ObjectClass* cls = program_.find_object(step.object_name);
            if (!cls) {
                fail(step.line, step.object_name, "unknown object in schedule");
                continue;
            }
            if (!cls->find_activity(step.activity_name)) {
                fail(step.line, step.activity_name,
                     "unknown activity of object " + cls->name);
                continue;
            }
            if (step.condition) {
                TypeContext ctx;
                ctx.self_class = cls;
                auto t = type_expr(*step.condition, ctx);
                if (t && *t != ValueType::Bool)
                    fail(step.line, step.activity_name, "schedule condition must be bool");
            }
        }
    }

    void check_init() {
        const InitSpec& init = program_.init;
        for (const auto& c : init.counts) {
            if (!program_.find_object(c.object_name)) {
                fail(c.line, c.object_name, "unknown object in count directive");
                continue;
            }
            if (const auto* lit = std::get_if<IntLit>(&c.count.node)) {
                if (lit->value < 0)
                    fail(c.line, c.object_name, "instance count must be non-negative");
            } else if (const auto* ref = std::get_if<Ref>(&c.count.node)) {
                auto it = program_.parameters.find(ref->name);
                if (it == program_.parameters.end())
                    fail(c.line, ref->name, "unknown parameter");
                else if (!it->second.integer || it->second.value < 0)
                    fail(c.line, ref->name,
                         "instance count parameter must be a non-negative integer");
            }
        }
        for (const auto& [name, kind] : init.layouts) {
            (void)kind;
            if (!program_.find_object(name)) fail(0, name, "unknown object in layout directive");
        }
        TypeContext ctx;
        ctx.allow_aggregates = false;
        for (const auto& ov : init.overrides) {
            const ObjectClass* cls = program_.find_object(ov.object_name);
            if (!cls) {
                fail(ov.line, ov.object_name, "unknown object in set directive");
                continue;
            }
            const StateDecl* s = cls->find_state(ov.state_name);
            if (!s) {
                fail(ov.line, ov.state_name, "unknown state of object " + cls->name);
                continue;
            }
            check_assignable(ov.line, ov.state_name, s->type, type_expr(ov.value, ctx));
        }
    }

    void check_recorders() {
        std::set<std::string> names;
        TypeContext ctx;
        ctx.allow_random = false;
        ctx.allow_sum_all = true;
        for (const auto& r : program_.recorders) {
            if (!names.insert(r.metric_name).second)
                fail(r.line, r.metric_name, "duplicate metric \"" + r.metric_name + "\"");
            auto t = type_expr(r.expr, ctx);
            if (t && !is_numeric(*t) && *t != ValueType::Bool)
                fail(r.line, r.metric_name, "recorder expressions must be numeric or bool");
        }
    }
};

}  // namespace

bool analyze_program(const AbmProgram& program, std::vector<Defect>& defects) {
    std::size_t before = defects.size();
    Analyzer(program, defects).run();
    return defects.size() == before;
}

std::map<std::string, ValueType> recorder_types(const AbmProgram& program) {
    std::map<std::string, ValueType> out;
    std::vector<Defect> scratch;
    Analyzer analyzer(program, scratch);
    TypeContext ctx;
    ctx.allow_random = false;
    ctx.allow_sum_all = true;
    for (const auto& r : program.recorders) {
        auto t = analyzer.type_expr(r.expr, ctx);
        out[r.metric_name] = t.value_or(ValueType::Real);
    }
    return out;
}

}  // namespace sage::dsl
