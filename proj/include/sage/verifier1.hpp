#pragma once

#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "sage/defect.hpp"
#include "sage/dsl/ast.hpp"
#include "sage/generator.hpp"
#include "sage/representation.hpp"

namespace sage::verifier1 {

class EmptyDefectList : public Error {
public:
    using Error::Error;
};

class UnknownMetric : public Error {
public:
    using Error::Error;
};

// Closure of everything that can influence one recorded metric: the
// assignment statements (with their enclosing blocks), the states they
// touch, and the parameters they read.
struct SliceResult {
    std::string metric;
    // (object, activity, path) where path is dot-joined statement indices
    // from the activity body root; closed under ancestors.
    std::set<std::tuple<std::string, std::string, std::string>> statements;
    std::set<std::pair<std::string, std::string>> states;  // (object, state)
    std::set<std::string> parameters;

    std::set<std::pair<std::string, std::string>> activities() const;
    bool contains_activity(const std::string& object, const std::string& activity) const;
};

// Static verification: compilation defects from the parse/type phase plus
// lacking-detail defects — placeholder or empty bodies, activities the
// scenario declares that the program lacks, and scheduled activities with
// no effect (no state write, no event). When the scenario is provided, each
// lacking-detail defect carries the matching activity description. An empty
// result is the operational definition of executable-and-elaborate.
std::vector<Defect> check_program(std::string_view source,
                                  const rep::ConceptualRepresentation* scenario = nullptr);
std::vector<Defect> check_program(const dsl::AbmProgram& program,
                                  const rep::ConceptualRepresentation* scenario = nullptr);

// Renders the defect-repair prompt: full program source, compilation errors
// as [error_line, error_code, error_reasons] triples, lacking details with
// their activity descriptions. Throws EmptyDefectList when there is nothing
// to repair.
gen::PromptText build_rectification_prompt(std::string_view source,
                                           const std::vector<Defect>& defects);

// Deterministic text rendering of a defect list (the prompt's report body).
std::string render_defect_report(const std::vector<Defect>& defects);

// Defects as a JSON array, one object per line.
std::string defects_to_json(const std::vector<Defect>& defects);

// Transitive def-use closure from the metric's recorder expression, fixed
// point over state writers; guard expressions and schedule conditions count
// as reads. Flow-insensitive: any writer of a reached state joins the slice.
SliceResult backward_slice(const dsl::AbmProgram& program, const std::string& metric);

}  // namespace sage::verifier1
