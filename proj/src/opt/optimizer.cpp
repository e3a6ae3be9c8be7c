#include "opt/optimizer.hpp"

#include <algorithm>
#include <set>

namespace mf::opt {

int continuation_signal(double j_best, double j_candidate, double epsilon) {
    return (j_best - j_candidate) > epsilon ? 1 : 0;
}

MetaOptimizer::MetaOptimizer(store::RunStore& run, gw::Gateway& gateway, OptimizerConfig config,
                             std::vector<corpus::TaskInstance> validation_tasks,
                             std::vector<corpus::SubtaskCluster> clusters)
    : run_(run),
      gateway_(gateway),
      config_(std::move(config)),
      validation_tasks_(std::move(validation_tasks)),
      clusters_(std::move(clusters)) {
    for (const auto& t : validation_tasks_) tasks_by_id_[t.id] = t;
    std::sort(clusters_.begin(), clusters_.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    load_state();  // single-step methods work directly on a resumed run
}

std::vector<corpus::TaskInstance> MetaOptimizer::subtask_tasks(int subtask_id) const {
    for (const auto& c : clusters_) {
        if (c.id != subtask_id) continue;
        std::vector<corpus::TaskInstance> out;
        for (const auto& id : c.member_task_ids) {
            auto it = tasks_by_id_.find(id);
            if (it == tasks_by_id_.end())
                fail(ErrorKind::CorruptRun, "cluster references unknown task '" + id + "'");
            out.push_back(it->second);
        }
        return out;
    }
    fail(ErrorKind::EmptySubtask, "unknown subtask " + std::to_string(subtask_id));
}

std::string MetaOptimizer::subtask_line(int subtask_id) const {
    for (const auto& c : clusters_) {
        if (c.id == subtask_id) {
            std::string line = "Subtask " + std::to_string(c.id);
            if (c.label) line += " — topic: " + *c.label;
            line += " (" + std::to_string(c.member_task_ids.size()) + " validation tasks)";
            return line;
        }
    }
    return "Subtask " + std::to_string(subtask_id);
}

eval::Score MetaOptimizer::evaluate_entry_on_subtask(const store::ArchiveEntry& entry,
                                                     int subtask_id) {
    auto key = std::make_pair(entry.id, subtask_id);
    auto it = score_memo_.find(key);
    if (it != score_memo_.end()) return it->second;

    eval::Score score;
    score.kind = config_.metric;
    if (!entry.invalid) {
        eval::EvalOptions options;
        options.metric = config_.metric;
        options.limits = config_.exec_limits;
        options.limits.model = config_.executor_model;
        options.concurrency = config_.concurrency;
        options.external = config_.external;
        score = eval::evaluate_workflow(entry.program, subtask_tasks(subtask_id), gateway_,
                                        options);
    }
    score_memo_[key] = score;
    return score;
}

void MetaOptimizer::record_fitness(store::ArchiveEntry& entry, int subtask_id, double value) {
    entry.fitness[subtask_id] = value;
    run_.update_entry(entry);
}

void MetaOptimizer::evaluate_on_all_subtasks(store::ArchiveEntry& entry) {
    for (const auto& c : clusters_) {
        double value = entry.invalid ? 0.0 : evaluate_entry_on_subtask(entry, c.id).value;
        entry.fitness[c.id] = value;
    }
    run_.update_entry(entry);
}

namespace {

std::string format_fitness(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::string MetaOptimizer::archive_block_for_subtask(int subtask_id) const {
    std::string block;
    for (int id : run_.entry_ids()) {
        store::ArchiveEntry entry = run_.load_entry(id);
        auto it = entry.fitness.find(subtask_id);
        if (it == entry.fitness.end()) continue;
        block += "### " + entry.name + " (fitness " + format_fitness(it->second) + ")\n";
        if (entry.invalid) {
            block += "invalid candidate: " + entry.note + "\n\n";
        } else {
            block += dsl::render_program(entry.program) + "\n";
        }
    }
    if (block.empty()) block = "(archive empty)\n";
    return block;
}

std::string MetaOptimizer::archive_list_block() const {
    std::string block;
    for (const auto& c : clusters_) {
        block += "## " + subtask_line(c.id) + "\n\n";
        // best entries for this subtask: fitness desc, then id asc, top 3
        std::vector<store::ArchiveEntry> scored;
        for (int id : run_.entry_ids()) {
            store::ArchiveEntry entry = run_.load_entry(id);
            if (entry.fitness.count(c.id) && !entry.invalid) scored.push_back(std::move(entry));
        }
        std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
            double fa = a.fitness.at(c.id), fb = b.fitness.at(c.id);
            if (fa != fb) return fa > fb;
            return a.id < b.id;
        });
        size_t take = std::min<size_t>(3, scored.size());
        for (size_t i = 0; i < take; ++i) {
            block += "### " + scored[i].name + " (fitness " +
                     format_fitness(scored[i].fitness.at(c.id)) + ")\n";
            block += dsl::render_program(scored[i].program) + "\n";
        }
    }
    return block;
}

store::ArchiveEntry MetaOptimizer::propose(const std::string& prompt,
                                           const std::vector<std::string>& expected_fields,
                                           store::Generation generation, int parent_id,
                                           const std::string& tag) {
    gw::ChatRequest req;
    req.model = config_.optimizer_model;
    req.temperature = config_.optimizer_temperature;
    req.seed = static_cast<long long>(config_.seed);
    req.messages = {{"system", "You are an expert designer of agentic workflows."},
                    {"user", prompt}};

    store::ArchiveEntry entry;
    entry.generation = generation;
    entry.parent_id = parent_id;
    try {
        auto fields = gw::complete_structured(gateway_, req, expected_fields);
        entry.name = fields.at("name");
        entry.thought = fields.at("thought");
        if (fields.count("reflection")) {
            entry.thought = fields.at("reflection") + "\n" + entry.thought;
        }
        entry.program = dsl::parse_program(fields.at("code"), config_.loop_cap);
        entry.program.name = entry.name;  // archive name wins over the inline one
    } catch (const Error& e) {
        // tombstone: failed candidates stay in the archive with fitness 0
        entry.invalid = true;
        entry.name = "invalid_" + tag;
        entry.note = e.what();
        entry.program = dsl::seed_program();  // placeholder, never executed
    }

    // names must be unique per run
    std::set<std::string> names;
    for (int id : run_.entry_ids()) names.insert(run_.load_entry(id).name);
    int next_id = run_.entry_ids().empty() ? 0 : run_.entry_ids().back() + 1;
    if (names.count(entry.name)) {
        entry.name += "_" + std::to_string(next_id);
        if (!entry.invalid) entry.program.name = entry.name;
    }
    run_.append_entry(entry);
    return entry;
}

store::ArchiveEntry MetaOptimizer::inner_step(const store::ArchiveEntry& current, int subtask_id,
                                              store::Generation generation) {
    eval::Score current_score = evaluate_entry_on_subtask(current, subtask_id);
    uint64_t report_seed =
        derive_seed(config_.seed, "inner/" + std::to_string(subtask_id) + "/" +
                                      std::to_string(generation.outer) + "/" +
                                      std::to_string(generation.inner));
    std::string prompt = build_inner_prompt(
        subtask_line(subtask_id), archive_block_for_subtask(subtask_id),
        eval::textual_loss_report(current_score,
                                  static_cast<size_t>(config_.reflection_case_cap), report_seed));
    ++counters_.optimizer_ops;
    store::ArchiveEntry candidate =
        propose(prompt, {"thought", "name", "code"}, generation, current.id, "inner");
    if (candidate.invalid) {
        record_fitness(candidate, subtask_id, 0.0);
    }
    return candidate;
}

int MetaOptimizer::run_inner_loop(int subtask_id, int outer_index) {
    store::ArchiveEntry current = run_.load_entry(global_id_);
    double j_best = run_.best_for_subtask(subtask_id).fitness.at(subtask_id);

    // do-while: at least one step per outer iteration, then gate on the
    // continuation signal
    for (int j = 1; j <= config_.n_inner; ++j) {
        store::ArchiveEntry candidate =
            inner_step(current, subtask_id, store::Generation{outer_index, j});
        double j_cand = 0.0;
        if (!candidate.invalid) {
            j_cand = evaluate_entry_on_subtask(candidate, subtask_id).value;
            record_fitness(candidate, subtask_id, j_cand);
            current = candidate;
        }
        j_best = std::max(j_best, j_cand);
        if (continuation_signal(j_best, j_cand, config_.epsilon) == 0) break;
    }
    return run_.best_for_subtask(subtask_id).id;
}

int MetaOptimizer::aggregate_and_update(int outer_index) {
    std::string prompt = build_outer_prompt(archive_list_block());
    ++counters_.optimizer_ops;
    store::ArchiveEntry merged = propose(prompt, {"thought", "name", "code"},
                                         store::Generation{outer_index, 0}, global_id_, "outer");
    if (merged.invalid) {
        // one retry with the parse diagnostic appended, then keep the
        // previous global workflow for this iteration
        std::string retry_prompt =
            prompt + "\n\nThe previous attempt failed: " + merged.note +
            "\nProvide a corrected workflow.";
        merged = propose(retry_prompt, {"thought", "name", "code"},
                         store::Generation{outer_index, 0}, global_id_, "outer_retry");
    }
    if (merged.invalid) {
        warnings_.push_back("outer " + std::to_string(outer_index) +
                            ": aggregation produced no valid workflow, keeping previous global");
        return global_id_;
    }
    evaluate_on_all_subtasks(merged);
    global_id_ = merged.id;
    return global_id_;
}

int MetaOptimizer::reflection_update(int outer_index) {
    store::ArchiveEntry global = run_.load_entry(global_id_);

    struct TaggedFailure {
        int subtask;
        eval::FailureCase failure;
    };
    std::vector<TaggedFailure> failures;
    for (const auto& c : clusters_) {
        eval::Score score = evaluate_entry_on_subtask(global, c.id);
        for (const auto& f : score.failures) failures.push_back({c.id, f});
    }
    if (failures.empty()) return global_id_;  // nothing to reflect on

    std::vector<size_t> order(failures.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(config_.seed, "reflection/" + std::to_string(outer_index)));
    rng.shuffle(order);
    size_t take = std::min<size_t>(static_cast<size_t>(config_.reflection_case_cap),
                                   order.size());
    std::sort(order.begin(), order.begin() + static_cast<long>(take));

    std::string case_list;
    for (size_t i = 0; i < take; ++i) {
        const auto& tagged = failures[order[i]];
        case_list += "--- case " + std::to_string(i + 1) + " (subtask " +
                     std::to_string(tagged.subtask) + ") ---\n";
        case_list += "question: " + tagged.failure.question + "\n";
        case_list += "gold: " + tagged.failure.gold_answer + "\n";
        case_list += "prediction: " + tagged.failure.prediction + "\n";
    }

    std::string prompt = build_reflection_prompt(case_list);
    ++counters_.optimizer_ops;
    store::ArchiveEntry candidate =
        propose(prompt, {"reflection", "thought", "name", "code"},
                store::Generation{outer_index, 0}, global_id_, "reflection");
    if (candidate.invalid) {
        std::string retry_prompt = prompt + "\n\nThe previous attempt failed: " +
                                   candidate.note + "\nProvide a corrected workflow.";
        candidate = propose(retry_prompt, {"reflection", "thought", "name", "code"},
                            store::Generation{outer_index, 0}, global_id_, "reflection_retry");
    }
    if (candidate.invalid) {
        warnings_.push_back("outer " + std::to_string(outer_index) +
                            ": reflection produced no valid workflow");
        return global_id_;
    }
    evaluate_on_all_subtasks(candidate);
    candidate = run_.load_entry(candidate.id);

    double candidate_mean = candidate.mean_fitness().value_or(0.0);
    double global_mean = run_.load_entry(global_id_).mean_fitness().value_or(0.0);
    if (candidate_mean >= global_mean) {
        global_id_ = candidate.id;
    } else {
        warnings_.push_back("outer " + std::to_string(outer_index) +
                            ": reflection candidate scored " + format_fitness(candidate_mean) +
                            " < " + format_fitness(global_mean) + ", discarded");
    }
    return global_id_;
}

void MetaOptimizer::persist_state() {
    json warnings = json::array();
    for (const auto& w : warnings_) warnings.push_back(w);
    run_.save_report("state", json{{"global", global_id_},
                                   {"optimizer_ops", counters_.optimizer_ops},
                                   {"describe_calls", counters_.describe_calls},
                                   {"warnings", warnings}});
}

void MetaOptimizer::load_state() {
    try {
        json state = run_.load_report("state");
        global_id_ = state.at("global").get<int>();
        counters_.optimizer_ops = state.value("optimizer_ops", 0);
        counters_.describe_calls = state.value("describe_calls", 0);
        warnings_ = state.value("warnings", std::vector<std::string>{});
    } catch (const Error&) {
        // fresh run
    }
}

void MetaOptimizer::check_stop(const std::string& phase) {
    if (!config_.stop_after_phase.empty() && config_.stop_after_phase == phase) {
        throw StoppedAtPhase{phase};
    }
}

int MetaOptimizer::run_meta_optimization() {
    load_state();

    if (!run_.has_phase("seeded")) {
        store::ArchiveEntry seed;
        seed.name = "seed_cot";
        seed.thought = "Built-in initial workflow.";
        seed.program = dsl::seed_program();
        seed.generation = {0, 0};
        seed.parent_id = -1;
        run_.append_entry(seed);
        global_id_ = seed.id;
        evaluate_on_all_subtasks(seed);
        persist_state();
        run_.mark_phase("seeded");
        check_stop("seeded");
    }

    for (int i = 1; i <= config_.n_outer; ++i) {
        std::string marker = "outer_" + std::to_string(i) + "_complete";
        if (run_.has_phase(marker)) continue;
        for (const auto& c : clusters_) run_inner_loop(c.id, i);
        aggregate_and_update(i);
        if (config_.reflection_enabled) reflection_update(i);
        persist_state();
        run_.mark_phase(marker);
        check_stop(marker);
    }

    if (!run_.has_phase("optimized")) {
        run_.mark_phase("optimized");
        check_stop("optimized");
    }
    return global_id_;
}

store::ArchiveEntry MetaOptimizer::test_time_adapt(const store::ArchiveEntry& global,
                                                   const std::string& description,
                                                   int cluster_id) {
    std::string prompt = build_adapt_prompt(description, dsl::render_program(global.program));
    ++counters_.optimizer_ops;
    store::ArchiveEntry adapted = propose(prompt, {"thought", "name", "code"},
                                          global.generation, global.id,
                                          "adapt_" + std::to_string(cluster_id));
    if (adapted.invalid) {
        // adaptation must never lose the ability to answer
        warnings_.push_back("cluster " + std::to_string(cluster_id) +
                            ": adaptation failed (" + adapted.note + "), using global workflow");
        return global;
    }
    return adapted;
}

json MetaOptimizer::run_test_phase(const std::vector<corpus::TaskInstance>& test_tasks,
                                   const std::vector<corpus::SubtaskCluster>& test_clusters,
                                   bool adapt_enabled) {
    load_state();
    if (global_id_ < 0) fail(ErrorKind::CorruptRun, "no optimized workflow to evaluate");
    store::ArchiveEntry global = run_.load_entry(global_id_);

    std::map<std::string, corpus::TaskInstance> by_id;
    for (const auto& t : test_tasks) by_id[t.id] = t;

    // phase 1: per-cluster description + adaptation, resumable via the
    // persisted cluster -> entry mapping
    std::map<int, int> chosen_ids;  // cluster id -> archive entry id
    if (adapt_enabled) {
        if (run_.has_phase("adapted")) {
            json saved = run_.load_report("adapted");
            for (const auto& [key, value] : saved.at("mapping").items()) {
                chosen_ids[std::stoi(key)] = value.get<int>();
            }
        } else {
            json mapping = json::object();
            json prompt_log = json::object();  // inspected by the answer-leak scan
            for (const auto& cluster : test_clusters) {
                uint64_t seed =
                    derive_seed(config_.seed, "describe/" + std::to_string(cluster.id));
                std::string dprompt =
                    corpus::describe_prompt(cluster, test_tasks, config_.describe_sample, seed);
                ++counters_.describe_calls;
                std::string description =
                    corpus::describe_subtask(cluster, test_tasks, config_.describe_sample,
                                             gateway_, config_.optimizer_model, seed);
                std::string aprompt =
                    build_adapt_prompt(description, dsl::render_program(global.program));
                store::ArchiveEntry chosen = test_time_adapt(global, description, cluster.id);
                std::string key = std::to_string(cluster.id);
                mapping[key] = chosen.id;
                prompt_log[key] = json{{"describe", dprompt}, {"adapt", aprompt}};
                chosen_ids[cluster.id] = chosen.id;
            }
            run_.save_report("adapted", json{{"mapping", mapping}});
            run_.save_report("prompts_test_phase", prompt_log);
            persist_state();
            run_.mark_phase("adapted");
            check_stop("adapted");
        }
    }

    // phase 2: evaluate each cluster on its full task set
    json rows = json::array();
    double weighted = 0.0;
    size_t total = 0;
    for (const auto& cluster : test_clusters) {
        std::vector<corpus::TaskInstance> members;
        for (const auto& id : cluster.member_task_ids) {
            auto it = by_id.find(id);
            if (it == by_id.end())
                fail(ErrorKind::CorruptRun, "test cluster references unknown task '" + id + "'");
            members.push_back(it->second);
        }

        store::ArchiveEntry chosen =
            adapt_enabled ? run_.load_entry(chosen_ids.at(cluster.id)) : global;

        eval::EvalOptions options;
        options.metric = config_.metric;
        options.limits = config_.exec_limits;
        options.limits.model = config_.executor_model;
        options.concurrency = config_.concurrency;
        options.external = config_.external;
        eval::Score score = eval::evaluate_workflow(chosen.program, members, gateway_, options);

        weighted += score.value * static_cast<double>(members.size());
        total += members.size();
        json row{{"cluster", cluster.id},
                 {"size", members.size()},
                 {"score", score.value},
                 {"workflow", chosen.name}};
        if (cluster.label) row["label"] = *cluster.label;
        rows.push_back(row);
    }

    json report{{"adaptation", adapt_enabled},
                {"rows", rows},
                {"overall", total ? weighted / static_cast<double>(total) : 0.0},
                {"metric", eval::metric_kind_name(config_.metric)}};
    run_.save_report(adapt_enabled ? "evaluation" : "evaluation_noadapt", report);
    persist_state();
    if (adapt_enabled && !run_.has_phase("evaluated")) {
        run_.mark_phase("evaluated");
        check_stop("evaluated");
    }
    return report;
}

int MetaOptimizer::budget_bound(size_t n_test_clusters) const {
    size_t m = clusters_.size();
    return static_cast<int>(
        static_cast<size_t>(config_.n_outer) *
            (m * static_cast<size_t>(config_.n_inner) + 2) +
        n_test_clusters);
}

}  // namespace mf::opt
