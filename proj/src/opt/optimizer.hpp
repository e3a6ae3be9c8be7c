#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "corpus/corpus.hpp"
#include "eval/evaluator.hpp"
#include "gateway/gateway.hpp"
#include "opt/prompts.hpp"
#include "store/store.hpp"

namespace mf::opt {

struct OptimizerConfig {
    int n_outer = 3;
    int n_inner = 6;
    double epsilon = 0.02;
    int reflection_case_cap = 5;
    bool reflection_enabled = true;
    std::string optimizer_model = "optimizer";
    std::string executor_model = "executor";
    double optimizer_temperature = 0.5;
    uint64_t seed = 0;
    int loop_cap = 4;
    size_t describe_sample = 5;
    eval::MetricKind metric = eval::MetricKind::SolveRateMath;
    dsl::ExecutionLimits exec_limits;
    int concurrency = 1;
    eval::ExternalEvaluator external;
    // test hook: stop after marking this phase, leaving a resumable run
    std::string stop_after_phase;
};

// Eq-style binary continuation gate: 1 iff the candidate is still more
// than epsilon below the subtask best.
int continuation_signal(double j_best, double j_candidate, double epsilon);

struct BudgetCounters {
    int optimizer_ops = 0;   // U1/U2/U3 + reflection invocations
    int describe_calls = 0;  // subtask description calls
};

// Signals that a stop_after_phase hook fired; the run stays resumable.
struct StoppedAtPhase {
    std::string phase;
};

class MetaOptimizer {
  public:
    MetaOptimizer(store::RunStore& run, gw::Gateway& gateway, OptimizerConfig config,
                  std::vector<corpus::TaskInstance> validation_tasks,
                  std::vector<corpus::SubtaskCluster> clusters);

    // Algorithm: seed -> n_outer x (per-subtask inner loops -> aggregate
    // -> reflection). Resumable at phase-marker granularity. Returns the
    // final global entry id.
    int run_meta_optimization();

    // Test phase: cluster descriptions -> adaptation -> evaluation.
    json run_test_phase(const std::vector<corpus::TaskInstance>& test_tasks,
                        const std::vector<corpus::SubtaskCluster>& test_clusters,
                        bool adapt_enabled);

    // Single-step operations, exposed for unit tests.
    store::ArchiveEntry inner_step(const store::ArchiveEntry& current, int subtask_id,
                                   store::Generation generation);
    int run_inner_loop(int subtask_id, int outer_index);
    int aggregate_and_update(int outer_index);
    int reflection_update(int outer_index);
    store::ArchiveEntry test_time_adapt(const store::ArchiveEntry& global,
                                        const std::string& description, int cluster_id);

    const BudgetCounters& counters() const { return counters_; }
    int global_entry_id() const { return global_id_; }
    int budget_bound(size_t n_test_clusters) const;

    eval::Score evaluate_entry_on_subtask(const store::ArchiveEntry& entry, int subtask_id);

  private:
    std::vector<corpus::TaskInstance> subtask_tasks(int subtask_id) const;
    std::string subtask_line(int subtask_id) const;
    std::string archive_block_for_subtask(int subtask_id) const;
    std::string archive_list_block() const;
    store::ArchiveEntry propose(const std::string& prompt,
                                const std::vector<std::string>& expected_fields,
                                store::Generation generation, int parent_id,
                                const std::string& tag);
    void record_fitness(store::ArchiveEntry& entry, int subtask_id, double value);
    void evaluate_on_all_subtasks(store::ArchiveEntry& entry);
    void persist_state();
    void load_state();
    void check_stop(const std::string& phase);

    store::RunStore& run_;
    gw::Gateway& gateway_;
    OptimizerConfig config_;
    std::vector<corpus::TaskInstance> validation_tasks_;
    std::vector<corpus::SubtaskCluster> clusters_;
    std::map<std::string, corpus::TaskInstance> tasks_by_id_;
    // (entry id, subtask id) -> score, memoized for prompt rendering
    std::map<std::pair<int, int>, eval::Score> score_memo_;
    BudgetCounters counters_;
    int global_id_ = -1;
    std::vector<std::string> warnings_;
};

}  // namespace mf::opt
