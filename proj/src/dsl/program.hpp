#pragma once

#include <string>
#include <vector>

#include "dsl/ast.hpp"

namespace mf::dsl {

struct Violation {
    std::string node_id;  // empty for program-level violations
    std::string message;
};

// Parses DSL text and validates it; throws Error with kind Syntax,
// UnknownNodeKind, DanglingReference, UnboundedLoop or InvalidProgram.
WorkflowProgram parse_program(const std::string& source, int loop_cap = 4);

// Parse only (syntax errors still throw); used where the caller wants
// the full validation report instead of the first violation.
WorkflowProgram parse_program_unchecked(const std::string& source);

// Report-returning validation; empty report iff the program is valid.
std::vector<Violation> validate_program(const WorkflowProgram& p, int loop_cap = 4);

// Canonical deterministic rendering; parse(render(p)) is structurally
// equal to p for every valid program.
std::string render_program(const WorkflowProgram& p);

// Built-in initial workflow: one step-by-step reasoning agent, a boxed
// answer extractor, and a return.
WorkflowProgram seed_program();

}  // namespace mf::dsl
