#pragma once

#include <string>
#include <vector>

#include "corpus/corpus.hpp"
#include "dsl/interp.hpp"
#include "eval/metrics.hpp"

namespace mf::eval {

enum class MetricKind {
    SolveRateMath,
    F1Qa,
    PassAt1External,
};

const char* metric_kind_name(MetricKind kind);
MetricKind metric_kind_from_name(const std::string& name);

struct TaskOutcome {
    std::string task_id;
    std::string prediction;
    double score = 0.0;
};

struct FailureCase {
    std::string task_id;
    std::string question;
    std::string gold_answer;
    std::string prediction;
    std::string trace_digest;
};

struct Score {
    MetricKind kind = MetricKind::SolveRateMath;
    double value = 0.0;  // mean of per-task scores
    std::vector<TaskOutcome> outcomes;
    std::vector<FailureCase> failures;
    int backend_calls = 0;
};

struct EvalOptions {
    MetricKind metric = MetricKind::SolveRateMath;
    dsl::ExecutionLimits limits;
    int concurrency = 1;
    ExternalEvaluator external;
    double f1_failure_threshold = 1.0;  // outcomes below this count as failures
};

// Executes the workflow on every task; a per-task execution error scores
// 0 for that task and is recorded as a failure case.
Score evaluate_workflow(const dsl::WorkflowProgram& program,
                        const std::vector<corpus::TaskInstance>& tasks, gw::Gateway& gateway,
                        const EvalOptions& options);

double score_prediction(MetricKind metric, const std::string& prediction,
                        const corpus::TaskInstance& task, const ExternalEvaluator& external);

// Deterministic textual summary of a Score, suitable for insertion into
// optimizer prompts: metric value plus up to sample_cap failure cases.
std::string textual_loss_report(const Score& score, size_t sample_cap, uint64_t seed);

}  // namespace mf::eval
