#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sage/pipeline.hpp"
#include "sage/dsl/parser.hpp"
#include "sage/dsl/printer.hpp"
#include "support/fixtures.hpp"
#include "support/tmpdir.hpp"

using namespace sage;
using namespace sage::pipeline;

namespace {

rep::ConceptualRepresentation epidemic_scenario() {
    return rep::parse_conceptual(R"({
      "objects": [{
        "name": "person",
        "states": [
          {"name": "age", "description": "age in years", "type": "int"},
          {"name": "infected", "description": "carries the virus", "type": "bool"},
          {"name": "immune", "description": "temporarily protected", "type": "bool"}
        ],
        "activities": [
          {"name": "get_infected", "description": "a person near an infected person may catch the virus"},
          {"name": "get_immune", "description": "an infected person may recover and become immune"},
          {"name": "lose_immunity", "description": "immunity wears off over time"},
          {"name": "grow_older", "description": "age advances every step"}
        ]
      }],
      "scheduling": [
        {"kind": "Random_Do", "object": "person", "activity": "get_infected"},
        {"kind": "Conditional_Do", "object": "person", "activity": "get_immune", "condition": "self.infected"}
      ],
      "parameters": {"population": 60}
    })");
}

dsl::AbmProgram epidemic_program() {
    auto parsed = dsl::parse_program(testsupport::fixture("epidemic.abm"));
    REQUIRE(parsed.clean());
    return *parsed.program;
}

}  // namespace

TEST_CASE("modeling: clean first generation needs no repair rounds") {
    gen::MockBackend backend(testsupport::fixture_path("modeling_clean"));
    auto scenario = epidemic_scenario();
    auto outcome = run_modeling(scenario, backend, 10);
    CHECK(outcome.success);
    CHECK(outcome.iterations_used == 0);
    CHECK(outcome.defect_history.size() == 1);
    CHECK(outcome.defect_history[0].empty());
    REQUIRE(outcome.program.has_value());
    CHECK(outcome.program->objects[0].name == "person");
}

TEST_CASE("modeling: three placeholders, one repaired per round") {
    gen::MockBackend backend(testsupport::fixture_path("modeling_repair"));
    auto scenario = epidemic_scenario();
    auto outcome = run_modeling(scenario, backend, 10);
    CHECK(outcome.success);
    CHECK(outcome.iterations_used == 3);
    REQUIRE(outcome.defect_history.size() == 4);
    CHECK(outcome.defect_history[0].size() == 3);
    CHECK(outcome.defect_history[1].size() == 2);
    CHECK(outcome.defect_history[2].size() == 1);
    CHECK(outcome.defect_history[3].empty());
}

TEST_CASE("modeling: budget exhaustion on an unhelpful repairer") {
    gen::MockBackend backend(testsupport::fixture_path("modeling_stuck"));
    auto scenario = epidemic_scenario();
    auto outcome = run_modeling(scenario, backend, 1);
    CHECK(!outcome.success);
    CHECK(outcome.iterations_used == 1);
    CHECK(outcome.defect_history.size() == 2);  // initial + one retry
    CHECK(outcome.defect_history[0].size() == 1);
    CHECK(outcome.defect_history[1].size() == 1);
    // the best-so-far program is still returned, parseable
    CHECK(outcome.program.has_value());
}

TEST_CASE("modeling: fixture miss surfaces as a GeneratorError with context") {
    testsupport::TmpDir dir("empty-fixtures");
    gen::MockBackend backend(dir.path());
    auto scenario = epidemic_scenario();
    try {
        run_modeling(scenario, backend, 3);
        FAIL("expected GeneratorError");
    } catch (const GeneratorError& e) {
        CHECK(std::string(e.what()).find("initial generation") != std::string::npos);
        CHECK(std::string(e.what()).find("no mock fixture") != std::string::npos);
    }
}

TEST_CASE("modeling: outcome is deterministic under the mock backend") {
    auto scenario = epidemic_scenario();
    gen::MockBackend b1(testsupport::fixture_path("modeling_repair"));
    gen::MockBackend b2(testsupport::fixture_path("modeling_repair"));
    auto o1 = run_modeling(scenario, b1, 10);
    auto o2 = run_modeling(scenario, b2, 10);
    CHECK(modeling_outcome_to_json(o1) == modeling_outcome_to_json(o2));
    CHECK(o1.final_source == o2.final_source);
}

TEST_CASE("solving: quarantine and vaccination satisfy the epidemic objective") {
    auto objective = rep::parse_objective(testsupport::fixture("objective.json"));
    auto program = epidemic_program();  // hand-written, not from the modeling stage
    auto scenario = epidemic_scenario();
    gen::MockBackend backend(testsupport::fixture_path("solving"));

    SolvingOptions options;
    options.budget = 5;
    options.seed = 1;
    options.steps = 80;

    auto outcome = run_solving(objective, program, backend, options, &scenario);
    CHECK(outcome.success);
    CHECK(outcome.iterations_used == 1);
    CHECK(outcome.verdict_history_length() == 2);  // baseline + 1 round
    CHECK(!outcome.baseline_verdict.satisfying_flag);
    REQUIRE(outcome.rounds.size() == 1);
    CHECK(outcome.rounds[0].verdict.satisfying_flag);
    CHECK(outcome.rounds[0].cross_check_ok);

    REQUIRE(outcome.accepted_solutions.size() == 2);
    CHECK(outcome.accepted_solutions[0].title == "enforce quarantine");
    CHECK(outcome.accepted_solutions[1].title == "promote vaccination");

    // the criteria behind the verdict
    REQUIRE(outcome.predicates.size() == 2);
    CHECK(outcome.predicates[0].text == "final(spread_rate) < 0.1");
    CHECK(outcome.predicates[1].text == "unchanged(spread_distance, 0.0)");

    // observable effect: final spread rate under the threshold
    const auto& result = outcome.rounds[0].verdict.per_criterion[0];
    REQUIRE(!result.observed.empty());
    CHECK(result.observed[0].second < 0.1);

    // baseline trace kept for the unchanged comparison
    CHECK(outcome.baseline.series.count("spread_distance") == 1);
    REQUIRE(outcome.program.has_value());
    CHECK(outcome.program->find_object("person")->find_activity("quarantine") != nullptr);
}

TEST_CASE("solving: pre-satisfied objective ends before any solution round") {
    auto objective = rep::parse_objective(R"({
      "problem": "keep the contact distance fixed",
      "criteria": [{"variable_name": "spread_distance", "variable_example": 2.0,
                    "requirement": "spread distance should not change"}]
    })");
    auto program = epidemic_program();

    testsupport::TmpDir dir("presat");
    testsupport::write_file((dir.path() / "gen_verification.0.txt").string(),
                            "```pred\nunchanged(spread_distance, 0.0)\n```\n");
    gen::MockBackend backend(dir.path());

    SolvingOptions options;
    options.seed = 3;
    options.steps = 20;
    auto outcome = run_solving(objective, program, backend, options);
    CHECK(outcome.success);
    CHECK(outcome.iterations_used == 0);
    CHECK(outcome.rounds.empty());
    CHECK(outcome.verdict_history_length() == 1);
    CHECK(outcome.accepted_solutions.empty());
}

TEST_CASE("solving: unhelpful patches exhaust the budget") {
    auto objective = rep::parse_objective(testsupport::fixture("objective.json"));
    auto program = epidemic_program();

    testsupport::TmpDir dir("adversarial");
    testsupport::write_file((dir.path() / "gen_verification.0.txt").string(),
                            "```pred\nfinal(spread_rate) < 0.1\n```\n");
    testsupport::write_file((dir.path() / "gen_verification.1.txt").string(),
                            "```pred\nunchanged(spread_distance, 0.0)\n```\n");
    const char* cot =
        "```relations\nparam waning_prob\n```\n"
        "```reasons\ntweak a knob and hope\n```\n"
        "```solutions\nsolution \"nudge waning\" {\n  set_param waning_prob = 0.029\n}\n```\n";
    testsupport::write_file((dir.path() / "cot.0.txt").string(), cot);
    testsupport::write_file((dir.path() / "cot.1.txt").string(), cot);
    testsupport::write_file((dir.path() / "modify.0.txt").string(),
                            "```patch\nset_param waning_prob = 0.029\n```\n");
    testsupport::write_file((dir.path() / "modify.1.txt").string(),
                            "```patch\nset_param waning_prob = 0.028\n```\n");
    gen::MockBackend backend(dir.path());

    SolvingOptions options;
    options.budget = 2;
    options.seed = 1;
    options.steps = 80;
    auto outcome = run_solving(objective, program, backend, options);
    CHECK(!outcome.success);
    CHECK(outcome.iterations_used == 2);
    CHECK(outcome.verdict_history_length() == 3);  // baseline + 2 rounds
    for (const auto& round : outcome.rounds) CHECK(!round.verdict.satisfying_flag);
    // ties on satisfied criteria keep the earliest program: the baseline
    REQUIRE(outcome.program.has_value());
    CHECK(outcome.program->parameters.at("waning_prob").value == 0.03);
}

TEST_CASE("solving: rejects a defective start program") {
    auto program = epidemic_program();
    program.find_object("person")->find_activity("get_immune")->body = {
        dsl::Statement(dsl::Todo{})};
    auto objective = rep::parse_objective(testsupport::fixture("objective.json"));
    testsupport::TmpDir dir("solve-pre");
    gen::MockBackend backend(dir.path());
    CHECK_THROWS_AS(run_solving(objective, program, backend, {}), Error);
}

TEST_CASE("solving: nested repair that never converges raises InnerRepairExhausted") {
    auto objective = rep::parse_objective(R"({
      "problem": "anything",
      "criteria": [{"variable_name": "spread_rate", "variable_example": 0.1,
                    "requirement": "below one tenth"}]
    })");
    auto program = epidemic_program();

    testsupport::TmpDir dir("inner-stuck");
    testsupport::write_file((dir.path() / "gen_verification.0.txt").string(),
                            "```pred\nfinal(spread_rate) < 0.1\n```\n");
    // the patch adds a scheduled activity whose body is a placeholder
    testsupport::write_file(
        (dir.path() / "cot.0.txt").string(),
        "```relations\nstate person.infected\n```\n"
        "```reasons\nr\n```\n"
        "```solutions\nsolution \"half-finished idea\" {\n"
        "  set_activity person.isolate {\n    todo\n  }\n"
        "  add_schedule do person.isolate\n}\n```\n");
    testsupport::write_file((dir.path() / "modify.0.txt").string(),
                            "```patch\nset_activity person.isolate {\n  todo\n}\n"
                            "add_schedule do person.isolate\n```\n");
    // every nested repair round replies with the same defective program
    gen::MockBackend probe(dir.path());
    SolvingOptions options;
    options.budget = 1;
    options.inner_budget = 2;
    options.seed = 1;
    options.steps = 10;

    // the rectifier answers are sequence files echoing the broken program
    auto patched_src = [&] {
        auto patch = dsl::parse_patch(
            "set_activity person.isolate {\n  todo\n}\nadd_schedule do person.isolate\n");
        return dsl::print_program(dsl::apply_patch(program, patch));
    }();
    std::string echo = "```abm\n" + patched_src + "```\n";
    testsupport::write_file((dir.path() / "rectify.0.txt").string(), echo);
    testsupport::write_file((dir.path() / "rectify.1.txt").string(), echo);

    gen::MockBackend backend(dir.path());
    CHECK_THROWS_AS(run_solving(objective, program, backend, options), InnerRepairExhausted);
}

TEST_CASE("solving: outcome is deterministic under the mock backend") {
    auto objective = rep::parse_objective(testsupport::fixture("objective.json"));
    auto program = epidemic_program();
    SolvingOptions options;
    options.budget = 5;
    options.seed = 1;
    options.steps = 80;

    gen::MockBackend b1(testsupport::fixture_path("solving"));
    gen::MockBackend b2(testsupport::fixture_path("solving"));
    auto o1 = run_solving(objective, program, b1, options);
    auto o2 = run_solving(objective, program, b2, options);
    CHECK(solving_outcome_to_json(o1) == solving_outcome_to_json(o2));
    CHECK(o1.final_source == o2.final_source);
    CHECK(sim::trace_to_string(o1.baseline) == sim::trace_to_string(o2.baseline));
}

TEST_CASE("solving: nested repair fixes a half-finished patch, then succeeds") {
    auto objective = rep::parse_objective(testsupport::fixture("objective.json"));
    auto program = epidemic_program();
    auto scenario = epidemic_scenario();

    // same quarantine/vaccination fixtures, but the patch also introduces a
    // placeholder activity that the nested repair loop must fill in
    testsupport::TmpDir dir("inner-success");
    for (const char* f : {"gen_verification.0.txt", "gen_verification.1.txt", "cot.0.txt"})
        testsupport::write_file((dir.path() / f).string(),
                                testsupport::fixture(std::string("solving/") + f));
    std::string modify = testsupport::fixture("solving/modify.0.txt");
    auto fence = modify.find("```\n\nThe full patched program");
    REQUIRE(fence != std::string::npos);
    // keep only the patch block and append the unfinished activity
    std::string patch_only = modify.substr(0, fence);
    auto close = patch_only.rfind("add_schedule do person.vaccinate");
    REQUIRE(close != std::string::npos);
    patch_only.insert(close,
                      "set_activity person.audit {\n  todo\n}\n"
                      "add_schedule do person.audit\n");
    testsupport::write_file((dir.path() / "modify.0.txt").string(), patch_only + "```\n");
    testsupport::write_file(
        (dir.path() / "rectify.json").string(),
        R"({"mode": "all", "bodies": {"person.audit": "record_event audited"}})");

    gen::MockBackend backend(dir.path());
    SolvingOptions options;
    options.budget = 5;
    options.inner_budget = 5;
    options.seed = 1;
    options.steps = 80;
    auto outcome = run_solving(objective, program, backend, options, &scenario);
    CHECK(outcome.success);
    REQUIRE(outcome.program.has_value());
    const auto* audit = outcome.program->find_object("person")->find_activity("audit");
    REQUIRE(audit != nullptr);
    CHECK(!audit->is_todo());
}

TEST_CASE("solving: a patch that cannot apply is a GeneratorError with context") {
    auto objective = rep::parse_objective(testsupport::fixture("objective.json"));
    auto program = epidemic_program();

    testsupport::TmpDir dir("bad-patch");
    testsupport::write_file((dir.path() / "gen_verification.0.txt").string(),
                            "```pred\nfinal(spread_rate) < 0.1\n```\n");
    testsupport::write_file((dir.path() / "gen_verification.1.txt").string(),
                            "```pred\nunchanged(spread_distance, 0.0)\n```\n");
    testsupport::write_file((dir.path() / "cot.0.txt").string(),
                            "```relations\nstate person.infected\n```\n```reasons\nr\n```\n"
                            "```solutions\nsolution \"ghost\" {\n"
                            "  remove_activity person.nonexistent\n}\n```\n");
    testsupport::write_file((dir.path() / "modify.0.txt").string(),
                            "```patch\nremove_activity person.nonexistent\n```\n");
    gen::MockBackend backend(dir.path());
    SolvingOptions options;
    options.seed = 1;
    options.steps = 10;
    try {
        run_solving(objective, program, backend, options);
        FAIL("expected GeneratorError");
    } catch (const GeneratorError& e) {
        CHECK(std::string(e.what()).find("patch application") != std::string::npos);
    }
}

TEST_CASE("solving: multi-seed confirmation still succeeds for a robust solution") {
    auto objective = rep::parse_objective(testsupport::fixture("objective.json"));
    auto program = epidemic_program();
    gen::MockBackend backend(testsupport::fixture_path("solving"));
    SolvingOptions options;
    options.budget = 5;
    options.seed = 1;
    options.steps = 80;
    options.extra_seeds = {2, 3};
    auto outcome = run_solving(objective, program, backend, options);
    CHECK(outcome.success);
}
