#pragma once

#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "sage/defect.hpp"
#include "sage/dsl/ast.hpp"

namespace sage::dsl {

// `program` is present whenever the source is syntactically parseable, even
// if semantic (name/type) defects were found, so later verification passes
// can keep inspecting the tree. A clean() result has no defects at all.
struct ParseResult {
    std::optional<AbmProgram> program;
    std::vector<Defect> defects;

    bool clean() const { return program.has_value() && defects.empty(); }
};

// Compiles DSL text into a type-checked program. All failures come back as
// compilation-class defects with 1-based line numbers; the parser recovers
// at declaration and statement boundaries to report several per pass.
ParseResult parse_program(std::string_view source);

// Parses a single expression (used for schedule conditions and patches).
std::optional<Expr> parse_expr_text(std::string_view source, std::vector<Defect>& defects);

// Parses a statement list, the body form used by activity patches.
std::optional<std::vector<Statement>> parse_statements_text(std::string_view source,
                                                            std::vector<Defect>& defects);

// Static types of a clean program's recorders, keyed by metric name.
std::map<std::string, ValueType> recorder_types(const AbmProgram& program);

// Semantic pass: name resolution and type checking over a parsed tree.
// Appends compilation defects; returns true when none were added.
bool analyze_program(const AbmProgram& program, std::vector<Defect>& defects);

}  // namespace sage::dsl
