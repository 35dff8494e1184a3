#pragma once

#include <string>

#include "sage/dsl/ast.hpp"

namespace sage::dsl {

// Canonical, deterministic rendering: equal programs print to equal bytes
// and parse_program(print_program(p)) is structurally equal to p.
std::string print_program(const AbmProgram& program);

std::string print_expr(const Expr& expr);
std::string print_statements(const std::vector<Statement>& body, int indent = 0);

// Shortest round-trip double formatting with a guaranteed decimal marker.
std::string format_real(double value);

}  // namespace sage::dsl
