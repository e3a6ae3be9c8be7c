#include <doctest.h>

#include "eval/evaluator.hpp"
#include "fixture.hpp"

using namespace mf;
using namespace mf::eval;

namespace {

corpus::TaskInstance arith_task(const std::string& id, int a, int b) {
    corpus::TaskInstance t;
    t.id = id;
    t.question = "Compute " + std::to_string(a) + " + " + std::to_string(b) + ".";
    t.gold_answer = std::to_string(a + b);
    return t;
}

// scripted gateway that solves some questions and flubs the rest
gw::Gateway arith_gateway() {
    std::vector<gw::ScriptedRule> rules;
    rules.push_back({"Compute 1 \\+ 2", true, json{{"thinking", "t"}, {"answer", "\\boxed{3}"}}.dump(), -1});
    rules.push_back({"Compute 10 \\+ 20", true, json{{"thinking", "t"}, {"answer", "\\boxed{30}"}}.dump(), -1});
    rules.push_back({"", false, json{{"thinking", "t"}, {"answer", "\\boxed{0}"}}.dump(), -1});
    return gw::Gateway(gw::scripted_rule_set(std::move(rules)));
}

}  // namespace

TEST_CASE("evaluate_workflow scores per task and records failures") {
    auto gateway = arith_gateway();
    std::vector<corpus::TaskInstance> tasks = {
        arith_task("a", 1, 2),
        arith_task("b", 10, 20),
        arith_task("c", 5, 6),  // hits the fallback rule -> wrong
        arith_task("d", 7, 8),  // hits the fallback rule -> wrong
    };
    EvalOptions options;
    Score score = evaluate_workflow(dsl::seed_program(), tasks, gateway, options);
    CHECK(score.value == doctest::Approx(0.5));
    REQUIRE(score.outcomes.size() == 4);
    CHECK(score.outcomes[0].score == 1.0);
    CHECK(score.outcomes[2].score == 0.0);
    CHECK(score.outcomes[2].prediction == "0");
    REQUIRE(score.failures.size() == 2);
    CHECK(score.failures[0].task_id == "c");
    CHECK(score.failures[0].gold_answer == "11");
    CHECK(!score.failures[0].trace_digest.empty());
    CHECK(score.backend_calls == 4);
}

TEST_CASE("a per-task execution error scores zero without killing the run") {
    // no rule matches the second question -> ScriptMiss inside the run
    std::vector<gw::ScriptedRule> rules = {
        {"Compute 1 \\+ 2", true, json{{"thinking", "t"}, {"answer", "\\boxed{3}"}}.dump(), -1},
    };
    gw::Gateway gateway(gw::scripted_rule_set(std::move(rules)));
    std::vector<corpus::TaskInstance> tasks = {arith_task("a", 1, 2), arith_task("b", 4, 4)};
    EvalOptions options;
    Score score = evaluate_workflow(dsl::seed_program(), tasks, gateway, options);
    CHECK(score.value == doctest::Approx(0.5));
    REQUIRE(score.failures.size() == 1);
    CHECK(score.failures[0].task_id == "b");
    CHECK(score.failures[0].prediction.find("<execution error:") == 0);
}

TEST_CASE("empty task set is rejected") {
    auto gateway = arith_gateway();
    EvalOptions options;
    try {
        evaluate_workflow(dsl::seed_program(), {}, gateway, options);
        FAIL("expected EmptySubtask");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptySubtask);
    }
}

TEST_CASE("concurrency does not change scores or outcome order") {
    std::vector<corpus::TaskInstance> tasks;
    for (int i = 0; i < 9; ++i) tasks.push_back(arith_task("t" + std::to_string(i), i, i));
    std::vector<gw::ScriptedRule> rules;
    for (int i = 0; i < 9; ++i) {
        rules.push_back({"Compute " + std::to_string(i) + " \\+ " + std::to_string(i), true,
                         json{{"thinking", "t"}, {"answer", "\\boxed{" + std::to_string(2 * i) + "}"}}.dump(),
                         -1});
    }

    gw::Gateway serial_gw(gw::scripted_rule_set(rules));
    gw::Gateway parallel_gw(gw::scripted_rule_set(rules));
    EvalOptions serial;
    EvalOptions parallel;
    parallel.concurrency = 4;
    Score a = evaluate_workflow(dsl::seed_program(), tasks, serial_gw, serial);
    Score b = evaluate_workflow(dsl::seed_program(), tasks, parallel_gw, parallel);
    CHECK(a.value == b.value);
    REQUIRE(a.outcomes.size() == b.outcomes.size());
    for (size_t i = 0; i < a.outcomes.size(); ++i) {
        CHECK(a.outcomes[i].task_id == b.outcomes[i].task_id);
        CHECK(a.outcomes[i].prediction == b.outcomes[i].prediction);
        CHECK(a.outcomes[i].score == b.outcomes[i].score);
    }
}

TEST_CASE("f1 metric flags partial credit as failures below the threshold") {
    corpus::TaskInstance t;
    t.id = "qa";
    t.question = "Where is the tower?";
    t.gold_answer = "paris france";
    std::vector<gw::ScriptedRule> rules = {
        {"", false, json{{"thinking", "t"}, {"answer", "\\boxed{paris texas}"}}.dump(), -1}};
    gw::Gateway gateway(gw::scripted_rule_set(std::move(rules)));
    EvalOptions options;
    options.metric = MetricKind::F1Qa;
    Score score = evaluate_workflow(dsl::seed_program(), {t}, gateway, options);
    CHECK(score.value == doctest::Approx(0.5));
    CHECK(score.failures.size() == 1);  // below the default threshold of 1.0
}

TEST_CASE("textual_loss_report format and sampling cap") {
    Score score;
    score.kind = MetricKind::SolveRateMath;
    score.value = 0.75;
    for (int i = 0; i < 8; ++i) {
        TaskOutcome o;
        o.task_id = "t" + std::to_string(i);
        o.score = i < 6 ? 1.0 : 0.0;
        score.outcomes.push_back(o);
    }
    for (int i = 6; i < 8; ++i) {
        score.failures.push_back(
            {"t" + std::to_string(i), "q" + std::to_string(i), "g", "p", "d"});
    }

    std::string report = textual_loss_report(score, 5, 3);
    CHECK(report.find("Fitness (solve_rate_math): 0.75 — 6 of 8 tasks fully solved.") == 0);
    CHECK(report.find("Failure cases (2 of 2 shown):") != std::string::npos);
    CHECK(report.find("question: q6") != std::string::npos);
    CHECK(report == textual_loss_report(score, 5, 3));  // seed-deterministic

    SUBCASE("cap limits the sample") {
        for (int i = 0; i < 10; ++i) {
            score.failures.push_back({"x" + std::to_string(i), "qx", "g", "p", "d"});
        }
        std::string capped = textual_loss_report(score, 5, 3);
        CHECK(capped.find("Failure cases (5 of 12 shown):") != std::string::npos);
        CHECK(capped.find("--- case 5 ---") != std::string::npos);
        CHECK(capped.find("--- case 6 ---") == std::string::npos);
    }

    SUBCASE("no failures") {
        score.failures.clear();
        CHECK(textual_loss_report(score, 5, 3).find("All tasks solved; no failure cases.") !=
              std::string::npos);
    }
}
