#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sage/criteria.hpp"
#include "sage/dsl/parser.hpp"
#include "sage/generator.hpp"
#include "support/ast_gen.hpp"
#include "support/fixtures.hpp"
#include "support/tmpdir.hpp"

using namespace sage;
using namespace sage::criteria;

namespace {

sim::SimulationTrace make_trace(
    const std::map<std::string, std::pair<dsl::ValueType, std::vector<double>>>& series) {
    sim::SimulationTrace t;
    for (const auto& [name, data] : series) {
        t.series[name].type = data.first;
        t.series[name].values = data.second;
        t.steps = static_cast<std::int64_t>(data.second.size());
    }
    return t;
}

}  // namespace

TEST_CASE("predicate parsing and printing") {
    auto p = parse_predicate("final(spread_rate) < 0.1");
    CHECK(print_predicate(p) == "final(spread_rate) < 0.1");
    CHECK(referenced_metrics(p) == std::vector<std::string>{"spread_rate"});

    auto u = parse_predicate("unchanged(spread_distance, 0.0)");
    CHECK(print_predicate(u) == "unchanged(spread_distance, 0.0)");

    auto composite =
        parse_predicate("final(a) < 1.0 and (max(b) > 2 or not unchanged(c)) and mean(d) == 0");
    CHECK(referenced_metrics(composite) == std::vector<std::string>{"a", "b", "c", "d"});
    // canonical print reparses to the same tree
    CHECK(parse_predicate(print_predicate(composite)) == composite);

    auto k = parse_predicate("last_k_mean(m, 5) >= -2.5");
    CHECK(print_predicate(k) == "last_k_mean(m, 5) >= -2.5");

    CHECK_THROWS_AS(parse_predicate("final(x) <"), PredicateParseError);
    CHECK_THROWS_AS(parse_predicate("gibberish"), PredicateParseError);
    CHECK_THROWS_AS(parse_predicate("final(x) < 1 trailing"), PredicateParseError);
    CHECK_THROWS_AS(parse_predicate("last_k_mean(m, 0) < 1"), PredicateParseError);
    CHECK_THROWS_AS(parse_predicate("unchanged(m, -1)"), PredicateParseError);
}

TEST_CASE("compile_criteria maps the epidemic objective through the mock backend") {
    auto objective = rep::parse_objective(testsupport::fixture("objective.json"));
    auto parsed = dsl::parse_program(testsupport::fixture("epidemic.abm"));
    REQUIRE(parsed.clean());
    gen::MockBackend backend(testsupport::fixture_path("solving"));

    auto predicates = compile_criteria(objective, *parsed.program, backend);
    REQUIRE(predicates.size() == 2);
    CHECK(predicates[0].text == "final(spread_rate) < 0.1");
    CHECK(predicates[1].text == "unchanged(spread_distance, 0.0)");
    CHECK(predicates[0].criterion.variable_name == "spread_rate");
}

TEST_CASE("compile_criteria: gibberish twice ends in PredicateParseError") {
    auto objective = rep::parse_objective(
        R"({"problem": "p", "criteria": [
            {"variable_name": "m", "variable_example": 1, "requirement": "r"}]})");
    auto parsed = dsl::parse_program(
        "object a {\n  state x: int = 0\n  activity f { self.x := 1 }\n}\n"
        "schedule { do a.f }\ninit { count a = 1 }\nrecord m = sum_all(a, other.x)\n");
    REQUIRE(parsed.clean());

    testsupport::TmpDir dir("pred-garbage");
    testsupport::write_file((dir.path() / "gen_verification.0.txt").string(),
                            "```pred\nnot a predicate at all!\n```\n");
    testsupport::write_file((dir.path() / "gen_verification.1.txt").string(),
                            "```pred\nstill garbage (\n```\n");
    gen::MockBackend backend(dir.path());
    CHECK_THROWS_AS(compile_criteria(objective, *parsed.program, backend),
                    PredicateParseError);
}

TEST_CASE("compile_criteria: retry can rescue one bad reply") {
    auto objective = rep::parse_objective(
        R"({"problem": "p", "criteria": [
            {"variable_name": "m", "variable_example": 1, "requirement": "r"}]})");
    auto parsed = dsl::parse_program(
        "object a {\n  state x: int = 0\n  activity f { self.x := 1 }\n}\n"
        "schedule { do a.f }\ninit { count a = 1 }\nrecord m = sum_all(a, other.x)\n");
    REQUIRE(parsed.clean());

    testsupport::TmpDir dir("pred-retry");
    testsupport::write_file((dir.path() / "gen_verification.0.txt").string(),
                            "```pred\nbroken(\n```\n");
    testsupport::write_file((dir.path() / "gen_verification.1.txt").string(),
                            "```pred\nfinal(m) > 0\n```\n");
    gen::MockBackend backend(dir.path());
    auto predicates = compile_criteria(objective, *parsed.program, backend);
    REQUIRE(predicates.size() == 1);
    CHECK(predicates[0].text == "final(m) > 0.0");
}

TEST_CASE("compile_criteria: unknown metric is rejected") {
    auto objective = rep::parse_objective(
        R"({"problem": "p", "criteria": [
            {"variable_name": "m", "variable_example": 1, "requirement": "r"}]})");
    auto parsed = dsl::parse_program(
        "object a {\n  state x: int = 0\n  activity f { self.x := 1 }\n}\n"
        "schedule { do a.f }\ninit { count a = 1 }\nrecord m = sum_all(a, other.x)\n");
    REQUIRE(parsed.clean());

    testsupport::TmpDir dir("pred-unknown");
    testsupport::write_file((dir.path() / "gen_verification.0.txt").string(),
                            "```pred\nfinal(nonexistent) < 1\n```\n");
    testsupport::write_file((dir.path() / "gen_verification.1.txt").string(),
                            "```pred\nfinal(nonexistent) < 1\n```\n");
    gen::MockBackend backend(dir.path());
    CHECK_THROWS_AS(compile_criteria(objective, *parsed.program, backend), UnknownMetricError);
}

TEST_CASE("evaluate: direct comparisons and observations") {
    auto candidate = make_trace({{"spread_rate", {dsl::ValueType::Real, {0.5, 0.3, 0.07}}}});
    auto baseline = candidate;

    CriterionPredicate cp;
    cp.criterion = {"spread_rate", "0.25", "below 0.1"};
    cp.expr = parse_predicate("final(spread_rate) < 0.1");
    auto verdict = evaluate({cp}, candidate, baseline);
    CHECK(verdict.satisfying_flag);
    REQUIRE(verdict.per_criterion.size() == 1);
    CHECK(verdict.per_criterion[0].satisfied);
    REQUIRE(verdict.per_criterion[0].observed.size() == 1);
    CHECK(verdict.per_criterion[0].observed[0].first == "final(spread_rate)");
    CHECK(verdict.per_criterion[0].observed[0].second == 0.07);
}

TEST_CASE("evaluate: unchanged on identical series, violated on drift") {
    auto baseline = make_trace({{"x", {dsl::ValueType::Int, {2, 2, 2}}}});
    auto same = baseline;
    auto drifted = make_trace({{"x", {dsl::ValueType::Int, {2, 3, 2}}}});

    CriterionPredicate cp;
    cp.criterion = {"x", "2", "unchanged"};
    cp.expr = parse_predicate("unchanged(x, 0)");
    CHECK(evaluate({cp}, same, baseline).satisfying_flag);
    auto bad = evaluate({cp}, drifted, baseline);
    CHECK(!bad.satisfying_flag);
    CHECK(bad.per_criterion[0].observed[0].second == 1.0);  // max pointwise gap
}

TEST_CASE("evaluate: default tolerance is exact for int, relative for real") {
    auto baseline = make_trace({{"i", {dsl::ValueType::Int, {10, 10}}},
                                {"r", {dsl::ValueType::Real, {100.0, 100.0}}}});
    auto near = make_trace({{"i", {dsl::ValueType::Int, {10, 11}}},
                            {"r", {dsl::ValueType::Real, {100.0, 100.0 + 5e-8}}}});

    CriterionPredicate ci;
    ci.criterion = {"i", "1", "unchanged"};
    ci.expr = parse_predicate("unchanged(i)");
    CHECK(!evaluate({ci}, near, baseline).satisfying_flag);

    CriterionPredicate cr;
    cr.criterion = {"r", "1.0", "unchanged"};
    cr.expr = parse_predicate("unchanged(r)");
    CHECK(evaluate({cr}, near, baseline).satisfying_flag);  // 5e-10 relative

    auto far = make_trace({{"i", {dsl::ValueType::Int, {10, 10}}},
                           {"r", {dsl::ValueType::Real, {100.0, 100.1}}}});
    CHECK(!evaluate({cr}, far, baseline).satisfying_flag);
}

TEST_CASE("evaluate: one failing predicate flips the conjunction, itemized") {
    auto candidate = make_trace({{"a", {dsl::ValueType::Real, {1, 2, 3}}},
                                 {"b", {dsl::ValueType::Real, {5, 5, 5}}},
                                 {"c", {dsl::ValueType::Real, {0, 0, 9}}}});
    auto baseline = candidate;
    // hand-recomputed: final(a)=3, mean(b)=5, max(c)=9
    std::vector<CriterionPredicate> preds(3);
    preds[0].criterion = {"a", "1", "a"};
    preds[0].expr = parse_predicate("final(a) == 3");
    preds[1].criterion = {"b", "1", "b"};
    preds[1].expr = parse_predicate("mean(b) == 5");
    preds[2].criterion = {"c", "1", "c"};
    preds[2].expr = parse_predicate("max(c) < 9");  // fails

    auto verdict = evaluate(preds, candidate, baseline);
    CHECK(!verdict.satisfying_flag);
    CHECK(verdict.per_criterion[0].satisfied);
    CHECK(verdict.per_criterion[1].satisfied);
    CHECK(!verdict.per_criterion[2].satisfied);

    // reordering never changes the conjunction
    std::vector<CriterionPredicate> reordered = {preds[2], preds[0], preds[1]};
    CHECK(evaluate(reordered, candidate, baseline).satisfying_flag == verdict.satisfying_flag);
}

TEST_CASE("evaluate: error paths") {
    auto candidate = make_trace({{"a", {dsl::ValueType::Real, {1, 2}}}});
    auto baseline = make_trace({{"a", {dsl::ValueType::Real, {1, 2, 3}}}});

    CriterionPredicate missing;
    missing.criterion = {"z", "1", "z"};
    missing.expr = parse_predicate("final(z) < 1");
    CHECK_THROWS_AS(evaluate({missing}, candidate, baseline), MissingMetric);

    CriterionPredicate mismatch;
    mismatch.criterion = {"a", "1", "a"};
    mismatch.expr = parse_predicate("unchanged(a)");
    CHECK_THROWS_AS(evaluate({mismatch}, candidate, baseline), SeriesLengthMismatch);

    auto empty = make_trace({{"a", {dsl::ValueType::Real, {}}}});
    CriterionPredicate agg;
    agg.criterion = {"a", "1", "a"};
    agg.expr = parse_predicate("final(a) < 1");
    CHECK_THROWS_AS(evaluate({agg}, empty, empty), EmptySeries);
}

TEST_CASE("property: conjunction is monotone under added predicates") {
    testgen::Rng rng(99);
    auto candidate = make_trace({{"a", {dsl::ValueType::Real, {1, 4, 2}}},
                                 {"b", {dsl::ValueType::Real, {0, 1, 0}}}});
    auto baseline = candidate;
    const char* pool[] = {
        "final(a) < 3",  "final(a) > 1",    "max(b) == 1",       "mean(a) > 10",
        "min(a) >= 1",   "unchanged(a)",    "not (final(b) == 0)", "last_k_mean(a, 2) > 2",
    };
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<CriterionPredicate> preds;
        int n = 1 + static_cast<int>(rng.bounded(5));
        for (int i = 0; i < n; ++i) {
            CriterionPredicate cp;
            cp.criterion = {"a", "1", "req"};
            cp.expr = parse_predicate(pool[rng.bounded(8)]);
            preds.push_back(cp);
        }
        bool before = evaluate(preds, candidate, baseline).satisfying_flag;
        CriterionPredicate extra;
        extra.criterion = {"b", "1", "req"};
        extra.expr = parse_predicate(pool[rng.bounded(8)]);
        preds.push_back(extra);
        bool after = evaluate(preds, candidate, baseline).satisfying_flag;
        if (before == false) CHECK(after == false);
    }
}

// aggregates against plain-loop recomputation on random series
TEST_CASE("oracle: aggregates match direct recomputation on 1000 series") {
    testgen::Rng rng(4242);
    for (int trial = 0; trial < 1000; ++trial) {
        bool integral = rng.chance(0.5);
        std::size_t n = 1 + rng.bounded(40);
        std::vector<double> values;
        for (std::size_t i = 0; i < n; ++i) {
            if (integral)
                values.push_back(static_cast<double>(static_cast<std::int64_t>(rng.bounded(2001)) - 1000));
            else
                values.push_back((rng.real01() - 0.5) * 2000.0);
        }
        auto trace = make_trace(
            {{"m", {integral ? dsl::ValueType::Int : dsl::ValueType::Real, values}}});

        double want_final = values[n - 1];
        double want_max = values[0], want_min = values[0], sum = 0;
        for (double v : values) {
            if (v > want_max) want_max = v;
            if (v < want_min) want_min = v;
            sum += v;
        }
        double want_mean = sum / static_cast<double>(n);
        std::size_t k = 1 + rng.bounded(n);
        double ksum = 0;
        for (std::size_t i = n - k; i < n; ++i) ksum += values[i];
        double want_kmean = ksum / static_cast<double>(k);

        auto check = [&](const std::string& text, double want, bool exact) {
            CriterionPredicate cp;
            cp.criterion = {"m", "1", "req"};
            cp.expr = parse_predicate(text);
            auto verdict = evaluate({cp}, trace, trace);
            double got = verdict.per_criterion[0].observed[0].second;
            CAPTURE(text);
            if (exact)
                CHECK(got == want);
            else
                CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
        };
        check("final(m) == 0", want_final, integral);
        check("max(m) == 0", want_max, integral);
        check("min(m) == 0", want_min, integral);
        check("mean(m) == 0", want_mean, false);
        check("last_k_mean(m, " + std::to_string(k) + ") == 0", want_kmean, false);
    }
}
