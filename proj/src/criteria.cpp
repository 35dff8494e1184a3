#include "sage/criteria.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "sage/dsl/lexer.hpp"
#include "sage/dsl/printer.hpp"

namespace sage::criteria {

using dsl::Token;
using dsl::TokenKind;

namespace {

const char* to_string(AggKind k) {
    switch (k) {
        case AggKind::Final: return "final";
        case AggKind::Max: return "max";
        case AggKind::Min: return "min";
        case AggKind::Mean: return "mean";
        case AggKind::LastKMean: return "last_k_mean";
    }
    return "?";
}

const char* to_string(CmpOp op) {
    switch (op) {
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Eq: return "==";
        case CmpOp::Ne: return "!=";
        case CmpOp::Ge: return ">=";
        case CmpOp::Gt: return ">";
    }
    return "?";
}

class PredParser {
public:
    explicit PredParser(std::string_view text) {
        auto lexed = dsl::tokenize(text);
        if (!lexed.defects.empty())
            throw PredicateParseError("bad predicate text: " + lexed.defects[0].reason);
        tokens_ = std::move(lexed.tokens);
    }

    Pred parse() {
        Pred p = parse_or();
        if (!at(TokenKind::EndOfFile))
            throw PredicateParseError("trailing input after predicate: \"" + peek().text + "\"");
        return p;
    }

private:
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;

    const Token& peek() const { return tokens_[pos_]; }
    const Token& advance() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }
    bool at(TokenKind k) const { return peek().kind == k; }
    bool at_word(std::string_view w) const {
        return (peek().kind == TokenKind::Identifier || peek().kind == TokenKind::Keyword) &&
               peek().text == w;
    }
    bool eat_word(std::string_view w) {
        if (!at_word(w)) return false;
        advance();
        return true;
    }
    void expect(TokenKind k, const std::string& what) {
        if (!at(k)) throw PredicateParseError("expected " + what + " near \"" + peek().text + "\"");
        advance();
    }

    std::string expect_metric() {
        if (!at(TokenKind::Identifier))
            throw PredicateParseError("expected a metric name near \"" + peek().text + "\"");
        return advance().text;
    }

    double expect_number() {
        bool neg = false;
        if (at(TokenKind::Minus)) {
            neg = true;
            advance();
        }
        double v;
        if (at(TokenKind::IntLiteral)) v = static_cast<double>(advance().int_value);
        else if (at(TokenKind::RealLiteral)) v = advance().real_value;
        else throw PredicateParseError("expected a number near \"" + peek().text + "\"");
        return neg ? -v : v;
    }

    Pred parse_or() {
        Pred lhs = parse_and();
        while (eat_word("or")) {
            Pred rhs = parse_and();
            lhs = Pred{OrPred{dsl::Box<Pred>(std::move(lhs)), dsl::Box<Pred>(std::move(rhs))}};
        }
        return lhs;
    }

    Pred parse_and() {
        Pred lhs = parse_not();
        while (eat_word("and")) {
            Pred rhs = parse_not();
            lhs = Pred{AndPred{dsl::Box<Pred>(std::move(lhs)), dsl::Box<Pred>(std::move(rhs))}};
        }
        return lhs;
    }

    Pred parse_not() {
        if (eat_word("not")) {
            Pred inner = parse_not();
            return Pred{NotPred{dsl::Box<Pred>(std::move(inner))}};
        }
        return parse_atom();
    }

    Pred parse_atom() {
        if (at(TokenKind::LParen)) {
            advance();
            Pred inner = parse_or();
            expect(TokenKind::RParen, "\")\"");
            return inner;
        }
        if (eat_word("unchanged")) {
            expect(TokenKind::LParen, "\"(\"");
            UnchangedPred u;
            u.metric = expect_metric();
            if (at(TokenKind::Comma)) {
                advance();
                u.tolerance = expect_number();
                if (*u.tolerance < 0)
                    throw PredicateParseError("unchanged tolerance must be non-negative");
            }
            expect(TokenKind::RParen, "\")\"");
            return Pred{std::move(u)};
        }

        CmpPred cmp;
        if (eat_word("final")) cmp.agg.kind = AggKind::Final;
        else if (eat_word("max")) cmp.agg.kind = AggKind::Max;
        else if (eat_word("min")) cmp.agg.kind = AggKind::Min;
        else if (eat_word("mean")) cmp.agg.kind = AggKind::Mean;
        else if (eat_word("last_k_mean")) cmp.agg.kind = AggKind::LastKMean;
        else
            throw PredicateParseError("expected an aggregate or predicate near \"" +
                                      peek().text + "\"");
        expect(TokenKind::LParen, "\"(\"");
        cmp.agg.metric = expect_metric();
        if (cmp.agg.kind == AggKind::LastKMean) {
            expect(TokenKind::Comma, "\",\"");
            if (!at(TokenKind::IntLiteral))
                throw PredicateParseError("last_k_mean needs an integer window");
            cmp.agg.k = advance().int_value;
            if (cmp.agg.k < 1) throw PredicateParseError("last_k_mean window must be >= 1");
        }
        expect(TokenKind::RParen, "\")\"");

        switch (peek().kind) {
            case TokenKind::Lt: cmp.op = CmpOp::Lt; break;
            case TokenKind::Le: cmp.op = CmpOp::Le; break;
            case TokenKind::EqEq: cmp.op = CmpOp::Eq; break;
            case TokenKind::Ne: cmp.op = CmpOp::Ne; break;
            case TokenKind::Ge: cmp.op = CmpOp::Ge; break;
            case TokenKind::Gt: cmp.op = CmpOp::Gt; break;
            default:
                throw PredicateParseError("expected a comparison operator near \"" +
                                          peek().text + "\"");
        }
        advance();
        cmp.literal = expect_number();
        return Pred{std::move(cmp)};
    }
};

void collect_metrics(const Pred& p, std::vector<std::string>& out) {
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, CmpPred>) {
                out.push_back(node.agg.metric);
            } else if constexpr (std::is_same_v<T, UnchangedPred>) {
                out.push_back(node.metric);
            } else if constexpr (std::is_same_v<T, NotPred>) {
                collect_metrics(*node.operand, out);
            } else if constexpr (std::is_same_v<T, AndPred>) {
                collect_metrics(*node.lhs, out);
                collect_metrics(*node.rhs, out);
            } else {
                collect_metrics(*node.lhs, out);
                collect_metrics(*node.rhs, out);
            }
        },
        p.node);
}

int precedence_of(const Pred& p) {
    if (std::holds_alternative<OrPred>(p.node)) return 1;
    if (std::holds_alternative<AndPred>(p.node)) return 2;
    if (std::holds_alternative<NotPred>(p.node)) return 3;
    return 4;
}

void print_pred(const Pred& p, std::string& out) {
    auto side = [&](const Pred& q, int min) {
        bool parens = precedence_of(q) < min;
        if (parens) out += '(';
        print_pred(q, out);
        if (parens) out += ')';
    };
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, CmpPred>) {
                out += to_string(node.agg.kind);
                out += '(';
                out += node.agg.metric;
                if (node.agg.kind == AggKind::LastKMean)
                    out += ", " + std::to_string(node.agg.k);
                out += ") ";
                out += to_string(node.op);
                out += ' ';
                out += dsl::format_real(node.literal);
            } else if constexpr (std::is_same_v<T, UnchangedPred>) {
                out += "unchanged(" + node.metric;
                if (node.tolerance) out += ", " + dsl::format_real(*node.tolerance);
                out += ")";
            } else if constexpr (std::is_same_v<T, NotPred>) {
                out += "not ";
                side(*node.operand, 3);
            } else if constexpr (std::is_same_v<T, AndPred>) {
                side(*node.lhs, 2);
                out += " and ";
                side(*node.rhs, 3);
            } else {
                side(*node.lhs, 1);
                out += " or ";
                side(*node.rhs, 2);
            }
        },
        p.node);
}

const sim::MetricSeries& series_of(const sim::SimulationTrace& trace, const std::string& metric) {
    auto it = trace.series.find(metric);
    if (it == trace.series.end()) throw MissingMetric("metric \"" + metric + "\" not in trace");
    return it->second;
}

double aggregate(const Agg& agg, const sim::SimulationTrace& trace) {
    const auto& values = series_of(trace, agg.metric).values;
    if (values.empty())
        throw EmptySeries("metric \"" + agg.metric + "\" has an empty series");
    switch (agg.kind) {
        case AggKind::Final: return values.back();
        case AggKind::Max: return *std::max_element(values.begin(), values.end());
        case AggKind::Min: return *std::min_element(values.begin(), values.end());
        case AggKind::Mean: {
            double sum = 0;
            for (double v : values) sum += v;
            return sum / static_cast<double>(values.size());
        }
        case AggKind::LastKMean: {
            std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(agg.k), values.size());
            double sum = 0;
            for (std::size_t i = values.size() - k; i < values.size(); ++i) sum += values[i];
            return sum / static_cast<double>(k);
        }
    }
    return 0;
}

struct EvalVisitor {
    const sim::SimulationTrace& candidate;
    const sim::SimulationTrace& baseline;
    std::vector<std::pair<std::string, double>>& observed;

    bool eval(const Pred& p) {
        return std::visit(
            [&](const auto& node) -> bool {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, CmpPred>) {
                    double value = aggregate(node.agg, candidate);
                    std::string desc = to_string(node.agg.kind) + std::string("(") +
                                       node.agg.metric +
                                       (node.agg.kind == AggKind::LastKMean
                                            ? ", " + std::to_string(node.agg.k)
                                            : "") +
                                       ")";
                    observed.emplace_back(desc, value);
                    switch (node.op) {
                        case CmpOp::Lt: return value < node.literal;
                        case CmpOp::Le: return value <= node.literal;
                        case CmpOp::Eq: return value == node.literal;
                        case CmpOp::Ne: return value != node.literal;
                        case CmpOp::Ge: return value >= node.literal;
                        case CmpOp::Gt: return value > node.literal;
                    }
                    return false;
                } else if constexpr (std::is_same_v<T, UnchangedPred>) {
                    const auto& cand = series_of(candidate, node.metric);
                    const auto& base = series_of(baseline, node.metric);
                    if (cand.values.size() != base.values.size())
                        throw SeriesLengthMismatch(
                            "series length mismatch for metric \"" + node.metric + "\": " +
                            std::to_string(cand.values.size()) + " vs " +
                            std::to_string(base.values.size()));
                    double worst = 0;
                    bool ok = true;
                    for (std::size_t i = 0; i < cand.values.size(); ++i) {
                        double diff = std::abs(cand.values[i] - base.values[i]);
                        worst = std::max(worst, diff);
                        double allowed;
                        if (node.tolerance) {
                            allowed = *node.tolerance;
                        } else if (cand.type == dsl::ValueType::Real) {
                            allowed = 1e-9 * std::max(std::abs(cand.values[i]),
                                                      std::abs(base.values[i]));
                        } else {
                            allowed = 0.0;
                        }
                        if (diff > allowed) ok = false;
                    }
                    observed.emplace_back("max|" + node.metric + " - baseline|", worst);
                    return ok;
                } else if constexpr (std::is_same_v<T, NotPred>) {
                    return !eval(*node.operand);
                } else if constexpr (std::is_same_v<T, AndPred>) {
                    bool l = eval(*node.lhs);
                    bool r = eval(*node.rhs);
                    return l && r;
                } else {
                    bool l = eval(*node.lhs);
                    bool r = eval(*node.rhs);
                    return l || r;
                }
            },
            p.node);
    }
};

}  // namespace

Pred parse_predicate(std::string_view text) { return PredParser(text).parse(); }

std::string print_predicate(const Pred& pred) {
    std::string out;
    print_pred(pred, out);
    return out;
}

std::vector<std::string> referenced_metrics(const Pred& pred) {
    std::vector<std::string> out;
    collect_metrics(pred, out);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<CriterionPredicate> compile_criteria(const rep::ObjectiveRepresentation& objective,
                                                 const dsl::AbmProgram& program,
                                                 gen::Backend& backend, gen::RunLog* log) {
    std::string metrics;
    for (const auto& r : program.recorders) {
        if (!metrics.empty()) metrics += ", ";
        metrics += r.metric_name;
    }

    std::vector<CriterionPredicate> out;
    for (const auto& criterion : objective.criteria) {
        std::map<std::string, std::string> slots = {
            {"problem", objective.problem},
            {"variable_name", criterion.variable_name},
            {"variable_example", criterion.variable_example},
            {"requirement", criterion.requirement},
            {"metrics", metrics},
        };
        gen::PromptText prompt = gen::render_prompt(gen::PromptKind::GenVerification, slots);

        auto attempt = [&](const gen::PromptText& p) -> Pred {
            gen::GeneratorResponse resp = gen::generate(backend, p, log);
            auto payload = gen::parse_response(gen::PromptKind::GenVerification, resp.raw);
            Pred pred = parse_predicate(std::get<std::string>(payload));
            for (const auto& metric : referenced_metrics(pred))
                if (!program.find_recorder(metric))
                    throw UnknownMetricError("predicate references unknown metric \"" + metric +
                                             "\" (have: " + metrics + ")");
            return pred;
        };

        Pred pred;
        try {
            pred = attempt(prompt);
        } catch (const Error& first) {
            if (dynamic_cast<const gen::PayloadParseError*>(&first) == nullptr &&
                dynamic_cast<const PredicateParseError*>(&first) == nullptr &&
                dynamic_cast<const UnknownMetricError*>(&first) == nullptr)
                throw;
            // one corrective re-prompt with the error appended
            gen::PromptText retry = prompt;
            retry.text += std::string("\nYour previous reply was rejected: ") + first.what() +
                          "\nReply again with one ```pred block.\n";
            retry.slots["retry_error"] = first.what();
            try {
                pred = attempt(retry);
            } catch (const gen::PayloadParseError& second) {
                throw PredicateParseError(std::string("no usable predicate after retry: ") +
                                          second.what());
            }
        }

        CriterionPredicate cp;
        cp.criterion = criterion;
        cp.expr = pred;
        cp.text = print_predicate(pred);
        out.push_back(std::move(cp));
    }
    return out;
}

Verdict evaluate(const std::vector<CriterionPredicate>& predicates,
                 const sim::SimulationTrace& candidate, const sim::SimulationTrace& baseline) {
    Verdict verdict;
    verdict.satisfying_flag = true;
    for (const auto& cp : predicates) {
        CriterionResult result;
        result.criterion = cp.criterion;
        EvalVisitor visitor{candidate, baseline, result.observed};
        result.satisfied = visitor.eval(cp.expr);
        if (!result.satisfied) verdict.satisfying_flag = false;
        verdict.per_criterion.push_back(std::move(result));
    }
    return verdict;
}

std::string verdict_to_json(const Verdict& verdict) {
    nlohmann::ordered_json j;
    j["satisfying_flag"] = verdict.satisfying_flag;
    j["criteria"] = nlohmann::ordered_json::array();
    for (const auto& r : verdict.per_criterion) {
        nlohmann::ordered_json c;
        c["variable_name"] = r.criterion.variable_name;
        c["requirement"] = r.criterion.requirement;
        c["satisfied"] = r.satisfied;
        c["observed"] = nlohmann::ordered_json::object();
        for (const auto& [desc, value] : r.observed) c["observed"][desc] = value;
        j["criteria"].push_back(std::move(c));
    }
    return j.dump(2) + "\n";
}

}  // namespace sage::criteria
