#include "eval/evaluator.hpp"

#include <cstdio>
#include <future>

namespace mf::eval {

const char* metric_kind_name(MetricKind kind) {
    switch (kind) {
        case MetricKind::SolveRateMath: return "solve_rate_math";
        case MetricKind::F1Qa: return "f1_qa";
        case MetricKind::PassAt1External: return "pass_at_1_external";
    }
    return "?";
}

MetricKind metric_kind_from_name(const std::string& name) {
    if (name == "solve_rate_math") return MetricKind::SolveRateMath;
    if (name == "f1_qa") return MetricKind::F1Qa;
    if (name == "pass_at_1_external") return MetricKind::PassAt1External;
    fail(ErrorKind::ConfigError, "unknown metric '" + name + "'");
}

double score_prediction(MetricKind metric, const std::string& prediction,
                        const corpus::TaskInstance& task, const ExternalEvaluator& external) {
    switch (metric) {
        case MetricKind::SolveRateMath:
            return metric_math_equal(prediction, task.gold_answer);
        case MetricKind::F1Qa:
            return metric_f1(prediction, task.gold_answer);
        case MetricKind::PassAt1External:
            return metric_pass_at_1_external(prediction, task.question, external);
    }
    return 0.0;
}

Score evaluate_workflow(const dsl::WorkflowProgram& program,
                        const std::vector<corpus::TaskInstance>& tasks, gw::Gateway& gateway,
                        const EvalOptions& options) {
    if (tasks.empty()) fail(ErrorKind::EmptySubtask, "evaluation over an empty task set");
    if (options.metric == MetricKind::PassAt1External) check_external_evaluator(options.external);

    Score score;
    score.kind = options.metric;
    score.outcomes.resize(tasks.size());

    struct TaskResult {
        TaskOutcome outcome;
        std::optional<FailureCase> failure;
        int calls = 0;
    };

    auto run_one = [&](size_t i) -> TaskResult {
        const auto& task = tasks[i];
        TaskResult r;
        r.outcome.task_id = task.id;
        try {
            auto trace = dsl::execute_program(program, task, gateway, options.limits);
            r.calls = trace.backend_calls;
            r.outcome.prediction = trace.final_answer.content;
            r.outcome.score =
                score_prediction(options.metric, r.outcome.prediction, task, options.external);
            double threshold =
                options.metric == MetricKind::F1Qa ? options.f1_failure_threshold : 1.0;
            if (r.outcome.score < threshold) {
                r.failure = FailureCase{task.id, task.question, task.gold_answer,
                                        r.outcome.prediction, trace.digest()};
            }
        } catch (const Error& e) {
            // a crashing workflow scores 0 on the task, not the run
            r.outcome.prediction = std::string("<execution error: ") + e.what() + ">";
            r.outcome.score = 0.0;
            r.failure = FailureCase{task.id, task.question, task.gold_answer,
                                    r.outcome.prediction, ""};
        }
        return r;
    };

    std::vector<TaskResult> results(tasks.size());
    int width = std::max(1, options.concurrency);
    for (size_t base = 0; base < tasks.size(); base += static_cast<size_t>(width)) {
        size_t end = std::min(tasks.size(), base + static_cast<size_t>(width));
        std::vector<std::future<TaskResult>> futures;
        for (size_t i = base + 1; i < end; ++i) {
            futures.push_back(std::async(std::launch::async, run_one, i));
        }
        results[base] = run_one(base);
        for (size_t i = base + 1; i < end; ++i) {
            results[i] = futures[i - base - 1].get();
        }
    }

    double total = 0;
    for (size_t i = 0; i < results.size(); ++i) {
        score.outcomes[i] = results[i].outcome;
        total += results[i].outcome.score;
        score.backend_calls += results[i].calls;
        if (results[i].failure) score.failures.push_back(*results[i].failure);
    }
    score.value = total / static_cast<double>(tasks.size());
    return score;
}

std::string textual_loss_report(const Score& score, size_t sample_cap, uint64_t seed) {
    char value_buf[32];
    std::snprintf(value_buf, sizeof(value_buf), "%.2f", score.value);

    size_t correct = 0;
    for (const auto& o : score.outcomes) {
        if (o.score >= 1.0) ++correct;
    }
    std::string out = "Fitness (" + std::string(metric_kind_name(score.kind)) +
                      "): " + value_buf + " — " + std::to_string(correct) + " of " +
                      std::to_string(score.outcomes.size()) + " tasks fully solved.\n";

    if (score.failures.empty()) {
        out += "All tasks solved; no failure cases.\n";
        return out;
    }

    std::vector<size_t> order(score.failures.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "loss-report"));
    rng.shuffle(order);
    size_t take = std::min(sample_cap, order.size());
    std::sort(order.begin(), order.begin() + static_cast<long>(take));

    out += "Failure cases (" + std::to_string(take) + " of " +
           std::to_string(score.failures.size()) + " shown):\n";
    for (size_t i = 0; i < take; ++i) {
        const auto& f = score.failures[order[i]];
        out += "--- case " + std::to_string(i + 1) + " ---\n";
        out += "question: " + f.question + "\n";
        out += "gold: " + f.gold_answer + "\n";
        out += "prediction: " + f.prediction + "\n";
    }
    return out;
}

}  // namespace mf::eval
