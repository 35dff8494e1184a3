#include "sage/dsl/printer.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace sage::dsl {

std::string format_real(double value) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    std::string s(buf, end);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    return s;
}

namespace {

// Binding strength used to drop redundant parentheses.
enum Precedence {
    kOr = 1,
    kAnd = 2,
    kNot = 3,
    kCmp = 4,
    kAdd = 5,
    kMul = 6,
    kUnary = 7,
    kPrimary = 8,
};

int precedence_of(const Expr& e) {
    if (const auto* b = std::get_if<Binary>(&e.node)) {
        switch (b->op) {
            case BinaryOp::Or: return kOr;
            case BinaryOp::And: return kAnd;
            case BinaryOp::Add:
            case BinaryOp::Sub: return kAdd;
            case BinaryOp::Mul:
            case BinaryOp::Div: return kMul;
            default: return kCmp;
        }
    }
    if (std::holds_alternative<Not>(e.node)) return kNot;
    return kPrimary;
}

std::string quote_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    out += '"';
    return out;
}

void print_expr_at(const Expr& e, int min_prec, std::string& out);

void print_child(const Expr& child, int min_prec, std::string& out) {
    if (precedence_of(child) < min_prec) {
        out += '(';
        print_expr_at(child, kOr, out);
        out += ')';
    } else {
        print_expr_at(child, kOr, out);
    }
}

void print_expr_at(const Expr& e, int, std::string& out) {
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, BoolLit>) {
                out += node.value ? "true" : "false";
            } else if constexpr (std::is_same_v<T, IntLit>) {
                out += std::to_string(node.value);
            } else if constexpr (std::is_same_v<T, RealLit>) {
                out += format_real(node.value);
            } else if constexpr (std::is_same_v<T, StringLit>) {
                out += quote_string(node.value);
            } else if constexpr (std::is_same_v<T, PosLit>) {
                out += "pos(" + std::to_string(node.value.x) + ", " +
                       std::to_string(node.value.y) + ")";
            } else if constexpr (std::is_same_v<T, Ref>) {
                if (node.scope == RefScope::SelfState) out += "self.";
                if (node.scope == RefScope::OtherState) out += "other.";
                out += node.name;
            } else if constexpr (std::is_same_v<T, Binary>) {
                int prec = 0;
                switch (node.op) {
                    case BinaryOp::Or: prec = kOr; break;
                    case BinaryOp::And: prec = kAnd; break;
                    case BinaryOp::Add:
                    case BinaryOp::Sub: prec = kAdd; break;
                    case BinaryOp::Mul:
                    case BinaryOp::Div: prec = kMul; break;
                    default: prec = kCmp; break;
                }
                // comparisons do not chain, so both operands bind tighter
                print_child(*node.lhs, is_cmp(node.op) ? prec + 1 : prec, out);
                out += ' ';
                out += to_string(node.op);
                out += ' ';
                print_child(*node.rhs, prec + 1, out);
            } else if constexpr (std::is_same_v<T, Not>) {
                out += "not ";
                print_child(*node.operand, kNot, out);
            } else if constexpr (std::is_same_v<T, Bernoulli>) {
                out += "bernoulli(";
                print_expr_at(*node.probability, kOr, out);
                out += ')';
            } else if constexpr (std::is_same_v<T, Uniform>) {
                out += "uniform(";
                print_expr_at(*node.low, kOr, out);
                out += ", ";
                print_expr_at(*node.high, kOr, out);
                out += ')';
            } else if constexpr (std::is_same_v<T, RandInt>) {
                out += "randint(";
                print_expr_at(*node.low, kOr, out);
                out += ", ";
                print_expr_at(*node.high, kOr, out);
                out += ')';
            } else if constexpr (std::is_same_v<T, CountNeighbors>) {
                out += "count_neighbors(";
                print_expr_at(*node.radius, kOr, out);
                out += ", ";
                print_expr_at(*node.predicate, kOr, out);
                out += ')';
            } else if constexpr (std::is_same_v<T, CountAll>) {
                out += "count_all(" + node.object_name + ", ";
                print_expr_at(*node.predicate, kOr, out);
                out += ')';
            } else if constexpr (std::is_same_v<T, SumAll>) {
                out += "sum_all(" + node.object_name + ", ";
                print_expr_at(*node.value, kOr, out);
                out += ')';
            } else {
                static_assert(std::is_same_v<T, Distance>);
                out += "distance(self, other)";
            }
        },
        e.node);
}

void print_body(const std::vector<Statement>& body, int indent, std::string& out);

void print_statement(const Statement& stmt, int indent, std::string& out) {
    std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Assign>) {
                out += pad;
                out += node.target_scope == RefScope::SelfState ? "self." : "other.";
                out += node.state_name + " := ";
                print_expr_at(node.value, kOr, out);
                out += '\n';
            } else if constexpr (std::is_same_v<T, If>) {
                out += pad + "if ";
                print_expr_at(node.condition, kOr, out);
                out += " {";
                print_body(node.then_body, indent + 1, out);
                out += pad + "}";
                if (!node.else_body.empty()) {
                    out += " else {";
                    print_body(node.else_body, indent + 1, out);
                    out += pad + "}";
                }
                out += '\n';
            } else if constexpr (std::is_same_v<T, ForNeighbor>) {
                out += pad + "for_neighbor(";
                print_expr_at(node.radius, kOr, out);
                out += ") {";
                print_body(node.body, indent + 1, out);
                out += pad + "}\n";
            } else if constexpr (std::is_same_v<T, RecordEvent>) {
                out += pad + "record_event " + node.event_name + '\n';
            } else {
                static_assert(std::is_same_v<T, Todo>);
                out += pad + "todo\n";
            }
        },
        stmt.node);
}

void print_body(const std::vector<Statement>& body, int indent, std::string& out) {
    if (body.empty()) {
        out += " ";
        return;
    }
    out += '\n';
    for (const auto& stmt : body) print_statement(stmt, indent, out);
}

std::string format_param(const ParamValue& v) {
    if (v.integer) return std::to_string(static_cast<std::int64_t>(std::llround(v.value)));
    return format_real(v.value);
}

}  // namespace

std::string print_expr(const Expr& expr) {
    std::string out;
    print_expr_at(expr, kOr, out);
    return out;
}

std::string print_statements(const std::vector<Statement>& body, int indent) {
    std::string out;
    for (const auto& stmt : body) print_statement(stmt, indent, out);
    return out;
}

std::string print_program(const AbmProgram& p) {
    std::string out;

    for (const auto& [name, value] : p.parameters)
        out += "param " + name + " = " + format_param(value) + "\n";
    if (!p.parameters.empty()) out += '\n';

    for (const auto& obj : p.objects) {
        out += "object " + obj.name + " {\n";
        for (const auto& s : obj.state_decls) {
            out += "  state " + s.name + ": " + rep::to_string(s.type) + " = ";
            print_expr_at(s.init, kOr, out);
            out += '\n';
        }
        for (const auto& a : obj.activities) {
            out += "\n  activity " + a.name + " {";
            print_body(a.body, 2, out);
            out += "  }\n";
        }
        out += "}\n\n";
    }

    if (!p.schedule.empty()) {
        out += "schedule {\n";
        for (const auto& step : p.schedule) {
            out += "  ";
            switch (step.kind) {
                case ScheduleKind::Do: out += "do"; break;
                case ScheduleKind::RandomDo: out += "random_do"; break;
                case ScheduleKind::ConditionalDo: out += "conditional_do"; break;
                case ScheduleKind::RandomConditionalDo: out += "random_conditional_do"; break;
            }
            out += ' ' + step.object_name + '.' + step.activity_name;
            if (step.condition) {
                out += " when ";
                print_expr_at(*step.condition, kOr, out);
            }
            out += '\n';
        }
        out += "}\n\n";
    }

    if (!(p.init == InitSpec{})) {
        out += "init {\n";
        if (p.init.grid_width != 20 || p.init.grid_height != 20)
            out += "  grid " + std::to_string(p.init.grid_width) + ' ' +
                   std::to_string(p.init.grid_height) + '\n';
        if (p.init.seed != 0) out += "  seed " + std::to_string(p.init.seed) + '\n';
        for (const auto& [name, kind] : p.init.layouts) {
            (void)kind;
            out += "  layout " + name + " rowmajor\n";
        }
        for (const auto& c : p.init.counts) {
            out += "  count " + c.object_name + " = ";
            print_expr_at(c.count, kOr, out);
            out += '\n';
        }
        for (const auto& ov : p.init.overrides) {
            out += "  set " + ov.object_name + '.' + ov.state_name + " = ";
            print_expr_at(ov.value, kOr, out);
            out += '\n';
        }
        out += "}\n\n";
    }

    for (const auto& r : p.recorders) {
        out += "record " + r.metric_name + " = ";
        print_expr_at(r.expr, kOr, out);
        out += '\n';
    }

    while (!out.empty() && out.back() == '\n') out.pop_back();
    out += '\n';
    return out;
}

}  // namespace sage::dsl
