#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sage/dsl/ast.hpp"
#include "sage/dsl/patch.hpp"
#include "sage/error.hpp"
#include "sage/generator.hpp"
#include "sage/simulator.hpp"

namespace sage::eval {

class InvalidWeights : public Error {
public:
    using Error::Error;
};

struct CodeBleuWeights {
    double ngram = 0.1;
    double weighted_ngram = 0.1;
    double ast = 0.4;
    double dataflow = 0.4;
};

struct CodeBleuScore {
    double ngram = 0;           // 4-gram precision with brevity penalty
    double weighted_ngram = 0;  // same, language keywords weighted double
    double ast_match = 0;       // matched depth>=2 subtrees / reference subtrees
    double dataflow_match = 0;  // reference def-use edges found in candidate
    CodeBleuWeights weights;
    double total = 0;
};

// Similarity of two programs. The tree and dataflow components identify
// states and classes by declaration position, so renaming every identifier
// in the candidate leaves them unchanged.
CodeBleuScore codebleu(const dsl::AbmProgram& candidate, const dsl::AbmProgram& reference,
                       const CodeBleuWeights& weights = {});

struct SampleReport {
    std::string name;
    bool executable = false;
    bool elaborate = false;
    bool success = false;
    int attempts = 0;  // 1 + repair rounds
    CodeBleuScore score;
};

struct CorpusReport {
    std::vector<SampleReport> samples;
    double executable_rate = 0;  // percent
    double elaborate_rate = 0;   // percent
    double mean_codebleu = 0;
    std::array<int, 4> iteration_histogram{};  // <=3, 4-6, 7-9, >=10 attempts
};

struct EvalConfig {
    int budget = 10;
    CodeBleuWeights weights;
    std::filesystem::path run_root;  // per-sample artifact dirs when set
};

using BackendFactory =
    std::function<std::unique_ptr<gen::Backend>(const std::filesystem::path& fixtures_dir)>;

// Runs the modeling stage over every corpus sample directory (sorted by
// name; each holds scenario.json, reference.abm and a fixtures/ dir for the
// mock backend) and aggregates executable/elaborate rates, similarity
// scores and the iteration histogram. Failed samples land in the >=10 bin.
CorpusReport rate_corpus(const std::filesystem::path& corpus_dir, const BackendFactory& backend,
                         const EvalConfig& config);

std::string report_to_json(const CorpusReport& report);
std::string report_to_table(const CorpusReport& report);

struct SubstantivenessReport {
    std::vector<std::string> added_states;  // "object.state"
    std::vector<std::string> removed_states;
    std::vector<std::string> added_activities;  // added or fully replaced
    std::vector<std::string> removed_activities;
    std::map<std::string, bool> reachability;  // added item -> affects the run
    bool parameter_only = false;
    bool verdict = false;
};

// Judges whether a solution patch is substantive: it must add or delete
// states/activities (not just tune parameters), and every added item must
// demonstrably affect the simulation - executed at least once in the
// verification run or a member of some recorded metric's slice.
SubstantivenessReport assess_substantiveness(const std::vector<dsl::PatchDirective>& patch,
                                             const dsl::AbmProgram& program,
                                             const sim::SimulationTrace& trace);

std::string substantiveness_to_json(const SubstantivenessReport& report);

}  // namespace sage::eval
