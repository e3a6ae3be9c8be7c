#include "engine.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

namespace mf {
namespace fs = std::filesystem;

json normalize_config(json config) {
    if (!config.is_object()) fail(ErrorKind::ConfigError, "config must be a JSON object");

    json defaults{
        {"corpus", ""},
        {"run_dir", "runs"},
        {"run_id", ""},
        {"seed", 42},
        {"backend", "scripted"},
        {"cache_dir", ""},
        {"models", {{"optimizer", "optimizer"}, {"executor", "executor"}}},
        {"metric", "solve_rate_math"},
        {"external_command", ""},
        {"clusters", {{"m", 3}, {"n", 3}, {"label_mode", false}, {"embed_dim", 256}}},
        {"split", {{"validation", 1}, {"test", 4}}},
        {"optimizer",
         {{"n_outer", 3},
          {"n_inner", 6},
          {"epsilon", 0.02},
          {"reflection", true},
          {"reflection_case_cap", 5},
          {"temperature", 0.5},
          {"loop_cap", 4},
          {"describe_sample", 5}}},
        {"limits", {{"max_calls", 64}, {"max_wall_ms", 300000.0}}},
        {"concurrency", 1},
        {"stop_after_phase", ""},
        {"remote", {{"base_url", ""}, {"path", "/v1/chat/completions"}, {"timeout_s", 120}}},
        {"scripted_rules", json::array()},
        {"scripted_rules_file", ""},
    };
    defaults.merge_patch(config);
    config = std::move(defaults);

    const std::string backend = config.at("backend").get<std::string>();
    if (backend != "scripted" && backend != "remote")
        fail(ErrorKind::ConfigError, "backend must be 'scripted' or 'remote'");
    if (config.at("corpus").get<std::string>().empty())
        fail(ErrorKind::ConfigError, "missing corpus path");
    // resolve the metric name now so a typo fails before any work starts
    eval::metric_kind_from_name(config.at("metric").get<std::string>());
    if (config.at("metric") == "pass_at_1_external") {
        eval::ExternalEvaluator ev{config.at("external_command").get<std::string>()};
        try {
            eval::check_external_evaluator(ev);
        } catch (const Error& e) {
            fail(ErrorKind::ConfigError, e.what());  // a config-time problem
        }
    }
    if (config.at("optimizer").at("n_outer").get<int>() < 1 ||
        config.at("optimizer").at("n_inner").get<int>() < 1)
        fail(ErrorKind::ConfigError, "n_outer and n_inner must be >= 1");
    if (config.at("optimizer").at("epsilon").get<double>() < 0)
        fail(ErrorKind::ConfigError, "epsilon must be >= 0");
    if (backend == "remote" && config.at("remote").at("base_url").get<std::string>().empty())
        fail(ErrorKind::ConfigError, "remote backend requires remote.base_url");

    if (config.at("run_id").get<std::string>().empty()) {
        // content-derived run id keeps reruns of the same config in one
        // place; the stop hook is debug-only and must not change identity
        json identity = config;
        identity["stop_after_phase"] = "";
        config["run_id"] = "run-" + digest_hex(json_dump_stable(identity)).substr(0, 12);
    }
    return config;
}

Engine::Engine(const std::string& config_json) {
    json parsed = json::parse(config_json, nullptr, false);
    if (parsed.is_discarded()) fail(ErrorKind::ConfigError, "config is not valid JSON");
    config_ = normalize_config(std::move(parsed));
    run_id_ = config_.at("run_id").get<std::string>();
    run_root_ = config_.at("run_dir").get<std::string>();
}

gw::Gateway& Engine::gateway() {
    if (gateway_) return *gateway_;

    std::shared_ptr<gw::Backend> backend;
    if (config_.at("backend") == "scripted") {
        json rules = config_.at("scripted_rules");
        std::string file = config_.at("scripted_rules_file").get<std::string>();
        if (!file.empty()) {
            json from_file = json::parse(read_file(file), nullptr, false);
            if (from_file.is_discarded())
                fail(ErrorKind::ConfigError, "scripted rules file is not valid JSON: " + file);
            for (const auto& r : from_file) rules.push_back(r);
        }
        if (rules.empty())
            fail(ErrorKind::ConfigError,
                 "scripted backend requires scripted_rules or scripted_rules_file");
        backend = gw::ScriptedBackend::from_json(rules);
    } else {
        const char* key = std::getenv("METAFLOW_API_KEY");
        if (!key || !*key)
            fail(ErrorKind::ConfigError, "remote backend requires METAFLOW_API_KEY");
        gw::HttpBackendConfig cfg;
        cfg.base_url = config_.at("remote").at("base_url").get<std::string>();
        cfg.path = config_.at("remote").at("path").get<std::string>();
        cfg.timeout_s = config_.at("remote").at("timeout_s").get<int>();
        cfg.api_key = key;
        backend = gw::make_http_backend(cfg);
    }

    std::optional<fs::path> cache_dir;
    std::string cache = config_.at("cache_dir").get<std::string>();
    if (!cache.empty()) cache_dir = fs::path(cache);
    gateway_ = std::make_shared<gw::Gateway>(backend, cache_dir);
    return *gateway_;
}

opt::OptimizerConfig Engine::optimizer_config() const {
    const json& o = config_.at("optimizer");
    opt::OptimizerConfig cfg;
    cfg.n_outer = o.at("n_outer").get<int>();
    cfg.n_inner = o.at("n_inner").get<int>();
    cfg.epsilon = o.at("epsilon").get<double>();
    cfg.reflection_enabled = o.at("reflection").get<bool>();
    cfg.reflection_case_cap = o.at("reflection_case_cap").get<int>();
    cfg.optimizer_temperature = o.at("temperature").get<double>();
    cfg.loop_cap = o.at("loop_cap").get<int>();
    cfg.describe_sample = o.at("describe_sample").get<size_t>();
    cfg.optimizer_model = config_.at("models").at("optimizer").get<std::string>();
    cfg.executor_model = config_.at("models").at("executor").get<std::string>();
    cfg.seed = config_.at("seed").get<uint64_t>();
    cfg.metric = eval::metric_kind_from_name(config_.at("metric").get<std::string>());
    cfg.exec_limits.max_calls = config_.at("limits").at("max_calls").get<int>();
    cfg.exec_limits.max_wall_ms = config_.at("limits").at("max_wall_ms").get<double>();
    cfg.exec_limits.seed = static_cast<long long>(cfg.seed);
    cfg.concurrency = config_.at("concurrency").get<int>();
    cfg.external.command_template = config_.at("external_command").get<std::string>();
    cfg.stop_after_phase = config_.at("stop_after_phase").get<std::string>();
    return cfg;
}

std::pair<std::vector<corpus::TaskInstance>, std::vector<corpus::TaskInstance>>
Engine::load_and_split() const {
    auto tasks = corpus::load_corpus(config_.at("corpus").get<std::string>());
    corpus::SplitRatio ratio{config_.at("split").at("validation").get<int>(),
                             config_.at("split").at("test").get<int>()};
    return corpus::split_corpus(tasks, ratio, config_.at("seed").get<uint64_t>());
}

store::RunStore Engine::open_run(const std::string& run_id) const {
    return store::RunStore::open(run_root_, run_id.empty() ? run_id_ : run_id);
}

json Engine::cmd_cluster() {
    auto [validation, test] = load_and_split();

    corpus::ClusterOptions vopts;
    vopts.m = config_.at("clusters").at("m").get<size_t>();
    vopts.label_mode = config_.at("clusters").at("label_mode").get<bool>();
    vopts.seed = derive_seed(config_.at("seed").get<uint64_t>(), "cluster/validation");
    auto embedder =
        corpus::make_hashing_embedder(config_.at("clusters").at("embed_dim").get<size_t>());
    auto vclusters = corpus::cluster_tasks(validation, vopts, *embedder);

    corpus::ClusterOptions topts = vopts;
    topts.m = config_.at("clusters").at("n").get<size_t>();
    topts.seed = derive_seed(config_.at("seed").get<uint64_t>(), "cluster/test");
    auto tclusters = corpus::cluster_tasks(test, topts, *embedder);

    store::RunStore run = fs::exists(run_root_ / run_id_ / "manifest.json")
                              ? store::RunStore::open(run_root_, run_id_)
                              : store::RunStore::create(run_root_, run_id_, config_);
    run.save_clusters("validation", vclusters);
    run.save_clusters("test", tclusters);
    if (!run.has_phase("clustered")) run.mark_phase("clustered");

    auto summarize = [](const std::vector<corpus::SubtaskCluster>& cs) {
        json arr = json::array();
        for (const auto& c : cs) {
            json row{{"id", c.id}, {"size", c.member_task_ids.size()}};
            if (c.label) row["label"] = *c.label;
            arr.push_back(row);
        }
        return arr;
    };
    return json{{"run_id", run_id_},
                {"run_path", (run_root_ / run_id_).string()},
                {"validation_size", validation.size()},
                {"test_size", test.size()},
                {"validation_clusters", summarize(vclusters)},
                {"test_clusters", summarize(tclusters)}};
}

json Engine::cmd_optimize() {
    if (!fs::exists(run_root_ / run_id_ / "manifest.json")) cmd_cluster();
    store::RunStore run = open_run(run_id_);
    if (!run.has_phase("clustered"))
        fail(ErrorKind::CorruptRun, "run '" + run_id_ + "' has no cluster manifests");

    auto [validation, test] = load_and_split();
    auto clusters = run.load_clusters("validation");
    opt::OptimizerConfig cfg = optimizer_config();
    opt::MetaOptimizer optimizer(run, gateway(), cfg, validation, clusters);

    std::string stopped_at;
    int global = -1;
    try {
        global = optimizer.run_meta_optimization();
    } catch (const opt::StoppedAtPhase& stop) {
        stopped_at = stop.phase;
        global = optimizer.global_entry_id();
    }

    int bound = optimizer.budget_bound(run.load_clusters("test").size());
    if (optimizer.counters().optimizer_ops > bound)
        fail(ErrorKind::BudgetExceeded,
             "optimizer used " + std::to_string(optimizer.counters().optimizer_ops) +
                 " calls, bound is " + std::to_string(bound));

    // per-outer-iteration best fitness per subtask, derived from the archive
    json table = json::array();
    for (int i = 1; i <= cfg.n_outer; ++i) {
        json row{{"outer", i}};
        json per_subtask = json::object();
        double total = 0.0;
        int counted = 0;
        for (const auto& c : clusters) {
            double best = 0.0;
            bool any = false;
            for (int id : run.entry_ids()) {
                store::ArchiveEntry entry = run.load_entry(id);
                if (entry.generation.outer > i) continue;
                auto it = entry.fitness.find(c.id);
                if (it == entry.fitness.end()) continue;
                best = any ? std::max(best, it->second) : it->second;
                any = true;
            }
            if (any) {
                per_subtask[std::to_string(c.id)] = best;
                total += best;
                ++counted;
            }
        }
        row["best_per_subtask"] = per_subtask;
        row["mean_best"] = counted ? total / counted : 0.0;
        table.push_back(row);
    }

    json result{{"run_id", run_id_},
                {"global_entry", global},
                {"optimizer_ops", optimizer.counters().optimizer_ops},
                {"budget_bound", bound},
                {"fitness_table", table}};
    if (global >= 0) {
        store::ArchiveEntry entry = run.load_entry(global);
        result["global_name"] = entry.name;
        result["global_mean_fitness"] = entry.mean_fitness().value_or(0.0);
    }
    if (!stopped_at.empty()) result["stopped_at"] = stopped_at;
    return result;
}

json Engine::cmd_adapt_eval(const std::string& run_id, bool no_adapt) {
    store::RunStore run = open_run(run_id);
    if (!run.has_phase("optimized"))
        fail(ErrorKind::CorruptRun, "run has not completed meta-optimization");

    auto [validation, test] = load_and_split();
    auto vclusters = run.load_clusters("validation");
    auto tclusters = run.load_clusters("test");
    opt::OptimizerConfig cfg = optimizer_config();
    opt::MetaOptimizer optimizer(run, gateway(), cfg, validation, vclusters);

    std::string stopped_at;
    json report;
    try {
        report = optimizer.run_test_phase(test, tclusters, !no_adapt);
    } catch (const opt::StoppedAtPhase& stop) {
        stopped_at = stop.phase;
        report = json{{"stopped_at", stopped_at}};
    }

    int bound = optimizer.budget_bound(tclusters.size());
    if (optimizer.counters().optimizer_ops > bound)
        fail(ErrorKind::BudgetExceeded,
             "optimizer used " + std::to_string(optimizer.counters().optimizer_ops) +
                 " calls, bound is " + std::to_string(bound));

    json result{{"run_id", run.run_id()},
                {"report", report},
                {"report_path",
                 (run.dir() / "reports" /
                  (no_adapt ? "evaluation_noadapt.json" : "evaluation.json"))
                     .string()}};
    if (!stopped_at.empty()) result["stopped_at"] = stopped_at;
    return result;
}

json Engine::cmd_report(const std::string& run_id) const {
    store::RunStore run = open_run(run_id);
    run.verify();
    json snapshot = run.config_snapshot();
    int n_outer = snapshot.at("optimizer").at("n_outer").get<int>();

    json entries = json::array();
    std::set<int> subtasks;
    for (int id : run.entry_ids()) {
        store::ArchiveEntry entry = run.load_entry(id);
        json fitness = json::object();
        for (const auto& [subtask, value] : entry.fitness) {
            fitness[std::to_string(subtask)] = value;
            subtasks.insert(subtask);
        }
        entries.push_back(json{
            {"id", entry.id},
            {"name", entry.name},
            {"generation", {{"outer", entry.generation.outer}, {"inner", entry.generation.inner}}},
            {"parent", entry.parent_id},
            {"invalid", entry.invalid},
            {"fitness", fitness},
            {"mean_fitness", entry.mean_fitness().value_or(0.0)}});
    }

    // inner series: per subtask and outer iteration, candidate fitness in
    // proposal order; outer series: mean of per-subtask bests after each
    // outer iteration
    json inner = json::array();
    for (int t : subtasks) {
        for (int i = 1; i <= n_outer; ++i) {
            json values = json::array();
            for (int id : run.entry_ids()) {
                store::ArchiveEntry entry = run.load_entry(id);
                if (entry.generation.outer != i || entry.generation.inner == 0) continue;
                auto it = entry.fitness.find(t);
                if (it != entry.fitness.end()) values.push_back(it->second);
            }
            if (!values.empty())
                inner.push_back(json{{"subtask", t}, {"outer", i}, {"values", values}});
        }
    }
    json outer = json::array();
    for (int i = 1; i <= n_outer; ++i) {
        double total = 0.0;
        int counted = 0;
        for (int t : subtasks) {
            double best = 0.0;
            bool any = false;
            for (int id : run.entry_ids()) {
                store::ArchiveEntry entry = run.load_entry(id);
                if (entry.generation.outer > i) continue;
                auto it = entry.fitness.find(t);
                if (it == entry.fitness.end()) continue;
                best = any ? std::max(best, it->second) : it->second;
                any = true;
            }
            if (any) {
                total += best;
                ++counted;
            }
        }
        outer.push_back(json{{"outer", i}, {"mean_best", counted ? total / counted : 0.0}});
    }

    return json{{"run_id", run.run_id()},
                {"phases", run.phases()},
                {"entries", entries},
                {"series", {{"inner", inner}, {"outer", outer}}}};
}

}  // namespace mf
