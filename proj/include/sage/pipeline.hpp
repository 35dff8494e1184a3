#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sage/criteria.hpp"
#include "sage/defect.hpp"
#include "sage/dsl/ast.hpp"
#include "sage/dsl/patch.hpp"
#include "sage/generator.hpp"
#include "sage/representation.hpp"
#include "sage/simulator.hpp"

namespace sage::pipeline {

// Backend/payload failures re-thrown with the iteration they happened in.
class GeneratorError : public Error {
public:
    using Error::Error;
};

// The nested repair loop inside solving could not reach a defect-free
// program within its budget.
class InnerRepairExhausted : public Error {
public:
    using Error::Error;
};

struct ModelingOutcome {
    std::optional<dsl::AbmProgram> program;  // best attempt, when parseable
    std::string final_source;                // best attempt source text
    std::vector<std::vector<Defect>> defect_history;  // one entry per verification
    int iterations_used = 0;                 // repair rounds consumed
    bool success = false;                    // final defect list empty
};

// Modeling stage: generate a program from the scenario, then repair it
// against verifier findings until clean or the budget runs out. On budget
// exhaustion the attempt with the fewest defects (earliest tie) is kept.
ModelingOutcome run_modeling(const rep::ConceptualRepresentation& scenario,
                             gen::Backend& backend, int budget, gen::RunLog* log = nullptr);

struct SolvingOptions {
    int budget = 5;
    int inner_budget = 5;  // nested repair rounds per solution attempt
    std::int64_t seed = 0;
    std::int64_t steps = 100;
    std::vector<std::int64_t> extra_seeds;  // optional multi-seed confirmation
};

struct SolvingRound {
    std::vector<dsl::Solution> solutions;
    std::vector<dsl::PatchDirective> patch;
    std::string program_source;
    criteria::Verdict verdict;
    bool cross_check_ok = true;  // generator's full program matched the patch
};

struct SolvingOutcome {
    std::optional<dsl::AbmProgram> program;  // final (or best) solution-bearing model
    std::string final_source;
    std::vector<dsl::Solution> accepted_solutions;  // filled on success
    std::vector<criteria::CriterionPredicate> predicates;
    criteria::Verdict baseline_verdict;
    std::vector<SolvingRound> rounds;
    sim::SimulationTrace baseline;  // computed once, reused for `unchanged`
    int iterations_used = 0;
    bool success = false;

    std::size_t verdict_history_length() const { return rounds.size() + 1; }
};

// Solving stage: simulate the baseline, compile the objective's criteria
// into predicates, then iterate solution proposal -> patch -> nested repair
// -> simulate -> verdict until satisfied or out of budget. Accepts any
// defect-free program regardless of where it came from.
SolvingOutcome run_solving(const rep::ObjectiveRepresentation& objective,
                           const dsl::AbmProgram& start, gen::Backend& backend,
                           const SolvingOptions& options,
                           const rep::ConceptualRepresentation* scenario = nullptr,
                           gen::RunLog* log = nullptr);

// Shared helper: render -> generate -> extract, with one retry when the
// payload cannot be parsed, then BackendRefusal.
gen::Payload generate_payload(gen::Backend& backend, const gen::PromptText& prompt,
                              gen::RunLog* log);

std::string modeling_outcome_to_json(const ModelingOutcome& outcome);
std::string solving_outcome_to_json(const SolvingOutcome& outcome);

}  // namespace sage::pipeline
