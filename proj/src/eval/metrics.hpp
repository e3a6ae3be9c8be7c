#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mf::eval {

// Content of the first \boxed{...} block, braces balanced.
std::optional<std::string> extract_boxed(const std::string& text);

// Solve-rate comparison: boxed extraction, whitespace normalization,
// exact rational arithmetic with fraction<->decimal equivalence, and a
// 1e-9 tolerance guard for decimal formatting. Returns 0 or 1.
int metric_math_equal(const std::string& prediction, const std::string& gold);

// Token-level F1 after lowercase/punctuation/article normalization,
// multiset overlap; 0 when either side is empty.
double metric_f1(const std::string& prediction, const std::string& gold);

std::vector<std::string> f1_normalize_tokens(const std::string& text);

struct ExternalEvaluator {
    // placeholders {prediction} and {fixture} are replaced by temp file paths
    std::string command_template;
};

// Fails with ExternalEvaluatorMissing when the template is empty; meant
// to run at configuration time, not mid-run.
void check_external_evaluator(const ExternalEvaluator& ev);

int metric_pass_at_1_external(const std::string& prediction, const std::string& task_fixture,
                              const ExternalEvaluator& ev);

}  // namespace mf::eval
