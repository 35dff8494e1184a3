#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sage/representation.hpp"

namespace sage::dsl {

using rep::ScheduleKind;
using rep::StateType;

// Deep-copying, deep-comparing smart box so the recursive AST keeps plain
// value semantics.
template <typename T>
class Box {
public:
    Box() : ptr_(std::make_unique<T>()) {}
    Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}
    Box(const Box& other) : ptr_(std::make_unique<T>(*other.ptr_)) {}
    Box(Box&&) noexcept = default;
    Box& operator=(const Box& other) {
        ptr_ = std::make_unique<T>(*other.ptr_);
        return *this;
    }
    Box& operator=(Box&&) noexcept = default;

    T& operator*() { return *ptr_; }
    const T& operator*() const { return *ptr_; }
    T* operator->() { return ptr_.get(); }
    const T* operator->() const { return ptr_.get(); }

    friend bool operator==(const Box& a, const Box& b) { return *a.ptr_ == *b.ptr_; }

private:
    std::unique_ptr<T> ptr_;
};

struct Expr;

// Grid coordinate pair; the literal spelling is pos(x, y).
struct PosValue {
    std::int64_t x = 0;
    std::int64_t y = 0;
    bool operator==(const PosValue&) const = default;
};

enum class BinaryOp { Add, Sub, Mul, Div, Lt, Le, Eq, Ne, Ge, Gt, And, Or };
enum class RefScope { SelfState, OtherState, Param };

const char* to_string(BinaryOp op);
bool is_arith(BinaryOp op);
bool is_cmp(BinaryOp op);
bool is_bool_op(BinaryOp op);

struct BoolLit { bool value = false; bool operator==(const BoolLit&) const = default; };
struct IntLit { std::int64_t value = 0; bool operator==(const IntLit&) const = default; };
struct RealLit { double value = 0; bool operator==(const RealLit&) const = default; };
struct StringLit { std::string value; bool operator==(const StringLit&) const = default; };
struct PosLit { PosValue value; bool operator==(const PosLit&) const = default; };

struct Ref {
    RefScope scope = RefScope::Param;
    std::string name;
    bool operator==(const Ref&) const = default;
};

struct Binary {
    BinaryOp op = BinaryOp::Add;
    Box<Expr> lhs;
    Box<Expr> rhs;
    bool operator==(const Binary&) const = default;
};

struct Not {
    Box<Expr> operand;
    bool operator==(const Not&) const = default;
};

struct Bernoulli {
    Box<Expr> probability;
    bool operator==(const Bernoulli&) const = default;
};

struct Uniform {
    Box<Expr> low;
    Box<Expr> high;
    bool operator==(const Uniform&) const = default;
};

struct RandInt {
    Box<Expr> low;
    Box<Expr> high;
    bool operator==(const RandInt&) const = default;
};

// Same-class instances within Chebyshev radius, excluding self.
struct CountNeighbors {
    Box<Expr> radius;
    Box<Expr> predicate;  // `other` bound to each neighbor
    bool operator==(const CountNeighbors&) const = default;
};

struct CountAll {
    std::string object_name;
    Box<Expr> predicate;  // `other` bound to each instance of the class
    bool operator==(const CountAll&) const = default;
};

// Recorder-only aggregate: sums a numeric expression over all instances.
struct SumAll {
    std::string object_name;
    Box<Expr> value;  // `other` bound to each instance of the class
    bool operator==(const SumAll&) const = default;
};

// Toroidal Chebyshev distance between the executing instance and the
// neighbor currently in scope; spelled distance(self, other).
struct Distance {
    bool operator==(const Distance&) const = default;
};

struct Expr {
    using Node = std::variant<BoolLit, IntLit, RealLit, StringLit, PosLit, Ref, Binary, Not,
                              Bernoulli, Uniform, RandInt, CountNeighbors, CountAll, SumAll,
                              Distance>;
    Node node;
    int line = 0;  // not part of structural equality

    Expr() = default;
    Expr(Node n, int line_ = 0) : node(std::move(n)), line(line_) {}

    friend bool operator==(const Expr& a, const Expr& b) { return a.node == b.node; }
};

struct Statement;

struct Assign {
    RefScope target_scope = RefScope::SelfState;  // SelfState or OtherState
    std::string state_name;
    Expr value;
    bool operator==(const Assign&) const = default;
};

struct If {
    Expr condition;
    std::vector<Statement> then_body;
    std::vector<Statement> else_body;
    bool operator==(const If&) const = default;
};

struct ForNeighbor {
    Expr radius;
    std::vector<Statement> body;
    bool operator==(const ForNeighbor&) const = default;
};

struct RecordEvent {
    std::string event_name;
    bool operator==(const RecordEvent&) const = default;
};

// Explicit placeholder for a not-yet-written body.
struct Todo {
    bool operator==(const Todo&) const = default;
};

struct Statement {
    using Node = std::variant<Assign, If, ForNeighbor, RecordEvent, Todo>;
    Node node;
    int line = 0;  // not part of structural equality

    Statement() = default;
    Statement(Node n, int line_ = 0) : node(std::move(n)), line(line_) {}

    friend bool operator==(const Statement& a, const Statement& b) { return a.node == b.node; }
};

struct StateDecl {
    std::string name;
    StateType type = StateType::Bool;
    Expr init;
    int line = 0;
    friend bool operator==(const StateDecl& a, const StateDecl& b) {
        return a.name == b.name && a.type == b.type && a.init == b.init;
    }
};

struct Activity {
    std::string name;
    std::vector<Statement> body;
    int line = 0;
    friend bool operator==(const Activity& a, const Activity& b) {
        return a.name == b.name && a.body == b.body;
    }

    bool is_todo() const {
        return body.size() == 1 && std::holds_alternative<Todo>(body[0].node);
    }
};

struct ObjectClass {
    std::string name;
    std::vector<StateDecl> state_decls;
    std::vector<Activity> activities;
    int line = 0;
    friend bool operator==(const ObjectClass& a, const ObjectClass& b) {
        return a.name == b.name && a.state_decls == b.state_decls && a.activities == b.activities;
    }

    const StateDecl* find_state(const std::string& n) const;
    const Activity* find_activity(const std::string& n) const;
    Activity* find_activity(const std::string& n);
};

struct ScheduleStep {
    ScheduleKind kind = ScheduleKind::Do;
    std::string object_name;
    std::string activity_name;
    std::optional<Expr> condition;
    int line = 0;
    friend bool operator==(const ScheduleStep& a, const ScheduleStep& b) {
        return a.kind == b.kind && a.object_name == b.object_name &&
               a.activity_name == b.activity_name && a.condition == b.condition;
    }
};

// Instance-count expression is an int literal or an int parameter name.
struct CountSpec {
    std::string object_name;
    Expr count;
    int line = 0;
    friend bool operator==(const CountSpec& a, const CountSpec& b) {
        return a.object_name == b.object_name && a.count == b.count;
    }
};

// Per-instance initial-value override, applied after state defaults.
struct InitOverride {
    std::string object_name;
    std::string state_name;
    Expr value;
    int line = 0;
    friend bool operator==(const InitOverride& a, const InitOverride& b) {
        return a.object_name == b.object_name && a.state_name == b.state_name &&
               a.value == b.value;
    }
};

enum class LayoutKind { Random, RowMajor };

struct InitSpec {
    std::int64_t grid_width = 20;
    std::int64_t grid_height = 20;
    std::int64_t seed = 0;  // placeholder; the run seed overrides it
    std::vector<CountSpec> counts;
    std::vector<InitOverride> overrides;
    std::map<std::string, LayoutKind> layouts;  // object -> placement scheme
    bool operator==(const InitSpec&) const = default;

    LayoutKind layout_for(const std::string& object_name) const {
        auto it = layouts.find(object_name);
        return it == layouts.end() ? LayoutKind::Random : it->second;
    }
};

struct Recorder {
    std::string metric_name;
    Expr expr;
    int line = 0;
    friend bool operator==(const Recorder& a, const Recorder& b) {
        return a.metric_name == b.metric_name && a.expr == b.expr;
    }
};

// Literal spelling decides the parameter's static type: `80` is int,
// `0.25` (or `2.0`) is real.
struct ParamValue {
    double value = 0;
    bool integer = false;
    bool operator==(const ParamValue&) const = default;
};

struct AbmProgram {
    std::vector<ObjectClass> objects;
    std::vector<ScheduleStep> schedule;
    std::map<std::string, ParamValue> parameters;
    InitSpec init;
    std::vector<Recorder> recorders;
    bool operator==(const AbmProgram&) const = default;

    const ObjectClass* find_object(const std::string& n) const;
    ObjectClass* find_object(const std::string& n);
    const Recorder* find_recorder(const std::string& n) const;
};

// Static type of an expression under the closed type set. Str only arises
// from string literals and is accepted nowhere, so any use is a type error.
enum class ValueType { Bool, Int, Real, Position, Str };

const char* to_string(ValueType t);
ValueType value_type_of(StateType t);
bool is_numeric(ValueType t);

}  // namespace sage::dsl
