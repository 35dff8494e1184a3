#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sage/dsl/ast.hpp"
#include "sage/error.hpp"
#include "sage/generator.hpp"
#include "sage/representation.hpp"
#include "sage/simulator.hpp"

namespace sage::criteria {

class PredicateParseError : public Error {
public:
    using Error::Error;
};

class UnknownMetricError : public Error {
public:
    using Error::Error;
};

class MissingMetric : public Error {
public:
    using Error::Error;
};

class SeriesLengthMismatch : public Error {
public:
    using Error::Error;
};

class EmptySeries : public Error {
public:
    using Error::Error;
};

enum class AggKind { Final, Max, Min, Mean, LastKMean };
enum class CmpOp { Lt, Le, Eq, Ne, Ge, Gt };

struct Agg {
    AggKind kind = AggKind::Final;
    std::string metric;
    std::int64_t k = 0;  // LastKMean only
    bool operator==(const Agg&) const = default;
};

struct Pred;

struct CmpPred {
    Agg agg;
    CmpOp op = CmpOp::Lt;
    double literal = 0;
    bool operator==(const CmpPred&) const = default;
};

// Holds when the candidate series pointwise matches the baseline series
// within the tolerance. Without an explicit tolerance the default depends
// on the metric type: exact for int/bool, 1e-9 relative for real.
struct UnchangedPred {
    std::string metric;
    std::optional<double> tolerance;
    bool operator==(const UnchangedPred&) const = default;
};

struct NotPred {
    dsl::Box<Pred> operand;
    bool operator==(const NotPred&) const = default;
};

struct AndPred {
    dsl::Box<Pred> lhs, rhs;
    bool operator==(const AndPred&) const = default;
};

struct OrPred {
    dsl::Box<Pred> lhs, rhs;
    bool operator==(const OrPred&) const = default;
};

struct Pred {
    std::variant<CmpPred, UnchangedPred, NotPred, AndPred, OrPred> node;
    bool operator==(const Pred&) const = default;
};

Pred parse_predicate(std::string_view text);
std::string print_predicate(const Pred& pred);
std::vector<std::string> referenced_metrics(const Pred& pred);

struct CriterionPredicate {
    rep::Criterion criterion;
    Pred expr;
    std::string text;  // canonical predicate spelling
};

struct CriterionResult {
    rep::Criterion criterion;
    bool satisfied = false;
    // leaf-by-leaf observations, e.g. ("final(spread_rate)", 0.07)
    std::vector<std::pair<std::string, double>> observed;
};

struct Verdict {
    std::vector<CriterionResult> per_criterion;
    bool satisfying_flag = false;  // conjunction over criteria
};

// Asks the generator to translate each criterion into the verification
// language, parses and validates the result against the program's recorders.
// One automatic re-prompt (with the error appended) on a bad reply, then
// PredicateParseError / UnknownMetricError.
std::vector<CriterionPredicate> compile_criteria(const rep::ObjectiveRepresentation& objective,
                                                 const dsl::AbmProgram& program,
                                                 gen::Backend& backend,
                                                 gen::RunLog* log = nullptr);

// Pure evaluation of predicates over the candidate trace; `unchanged`
// consults the baseline trace.
Verdict evaluate(const std::vector<CriterionPredicate>& predicates,
                 const sim::SimulationTrace& candidate, const sim::SimulationTrace& baseline);

std::string verdict_to_json(const Verdict& verdict);

}  // namespace sage::criteria
