#include <doctest.h>

#include <algorithm>
#include <map>

#include "common.hpp"
#include "eval/metrics.hpp"

using namespace mf;
using namespace mf::eval;

namespace {

// independent oracle: multiset-overlap F1 computed from first principles
double oracle_f1(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) return 0.0;
    std::map<std::string, int> counts;
    for (const auto& t : gold) ++counts[t];
    int overlap = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    double precision = static_cast<double>(overlap) / static_cast<double>(pred.size());
    double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

}  // namespace

TEST_CASE("extract_boxed handles balanced braces and picks the first block") {
    CHECK(extract_boxed("so \\boxed{42} done") == "42");
    CHECK(extract_boxed("\\boxed{\\frac{1}{2}} trailing \\boxed{9}") == "\\frac{1}{2}");
    CHECK(extract_boxed("nested \\boxed{a{b{c}}d}") == "a{b{c}}d");
    CHECK(extract_boxed("no box") == std::nullopt);
    CHECK(extract_boxed("unterminated \\boxed{oops") == std::nullopt);
}

TEST_CASE("metric_math_equal equivalence suite") {
    // value-level equality across formats
    CHECK(metric_math_equal("42", "42") == 1);
    CHECK(metric_math_equal("  42 ", "42") == 1);
    CHECK(metric_math_equal("\\boxed{42}", "42") == 1);
    CHECK(metric_math_equal("The answer is \\boxed{42}.", "42") == 1);
    CHECK(metric_math_equal("1/2", "0.5") == 1);
    CHECK(metric_math_equal("0.5", "1/2") == 1);
    CHECK(metric_math_equal("\\frac{1}{2}", "0.5") == 1);
    CHECK(metric_math_equal("\\frac{3}{6}", "1/2") == 1);
    CHECK(metric_math_equal("-7", "-7.0") == 1);
    CHECK(metric_math_equal("+3", "3") == 1);
    CHECK(metric_math_equal("2.50", "5/2") == 1);
    CHECK(metric_math_equal("1000000000000000000001", "1000000000000000000001") == 1);

    // inequality
    CHECK(metric_math_equal("41", "42") == 0);
    CHECK(metric_math_equal("1/3", "0.3334") == 0);
    CHECK(metric_math_equal("", "42") == 0);
    CHECK(metric_math_equal("no number here", "42") == 0);
    CHECK(metric_math_equal("0.50000001", "1/2") == 0);  // above the 1e-9 guard
    CHECK(metric_math_equal("0.5000000000001", "1/2") == 1);  // within the guard

    // non-numeric answers fall back to normalized string comparison
    CHECK(metric_math_equal("\\boxed{yes}", "yes") == 1);
    CHECK(metric_math_equal("yes", "no") == 0);
}

TEST_CASE("metric_f1 normalization") {
    CHECK(metric_f1("The Eiffel Tower!", "eiffel tower") == doctest::Approx(1.0));
    CHECK(metric_f1("An apple", "the apple") == doctest::Approx(1.0));  // articles dropped
    CHECK(metric_f1("", "anything") == 0.0);
    CHECK(metric_f1("anything", "") == 0.0);
    CHECK(metric_f1("totally different words", "unrelated phrase entirely") == 0.0);
    // half overlap: pred {paris, france}, gold {paris, texas}
    CHECK(metric_f1("Paris France", "paris texas") == doctest::Approx(0.5));
}

TEST_CASE("metric_f1 matches the brute-force oracle on 200 randomized cases") {
    // vocab avoids articles and punctuation so join(tokens) is already in
    // normalized form and the oracle sees the same token streams
    const std::vector<std::string> vocab = {"red",  "blue", "tower", "river", "seven",
                                            "king", "map",  "stone", "wind",  "echo"};
    Rng rng(derive_seed(4242, "f1-oracle"));
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::string> pred, gold;
        size_t np = rng.below(8);  // 0..7 tokens, duplicates likely
        size_t ng = rng.below(8);
        for (size_t i = 0; i < np; ++i) pred.push_back(vocab[rng.below(vocab.size())]);
        for (size_t i = 0; i < ng; ++i) gold.push_back(vocab[rng.below(vocab.size())]);
        double expected = oracle_f1(pred, gold);
        double actual = metric_f1(join(pred), join(gold));
        REQUIRE_MESSAGE(actual == doctest::Approx(expected).epsilon(1e-12),
                        "trial " << trial << " pred='" << join(pred) << "' gold='" << join(gold)
                                 << "'");
    }
}

TEST_CASE("f1_normalize_tokens lowercases, strips punctuation and articles") {
    auto tokens = f1_normalize_tokens("A quick, BROWN fox; the end!");
    CHECK(tokens == std::vector<std::string>{"quick", "brown", "fox", "end"});
}

TEST_CASE("external evaluator is checked at configuration time") {
    try {
        check_external_evaluator(ExternalEvaluator{""});
        FAIL("expected ExternalEvaluatorMissing");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ExternalEvaluatorMissing);
    }
    check_external_evaluator(ExternalEvaluator{"true {prediction} {fixture}"});
}

TEST_CASE("external evaluator runs the command and maps the exit status") {
    ExternalEvaluator pass{"grep -q good {prediction}"};
    ExternalEvaluator fail{"grep -q absent {prediction}"};
    CHECK(metric_pass_at_1_external("a good prediction", "fixture", pass) == 1);
    CHECK(metric_pass_at_1_external("a good prediction", "fixture", fail) == 0);
}
