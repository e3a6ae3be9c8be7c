// metaflow command-line driver. Talks to the engine exclusively through
// the C API in metaflow/metaflow.h.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "metaflow/metaflow.h"

namespace {

using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonFlags {
    std::string config_path;
    std::string corpus;
    std::string run_dir;
    std::string run_id;
    std::optional<long long> seed;
    std::string backend;
    std::optional<int> n_outer;
    std::optional<int> n_inner;
    std::optional<double> epsilon;
    std::optional<int> clusters;
    std::optional<int> concurrency;
    std::string stop_after_phase;
    std::string scripted_rules_file;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON config file");
    cmd->add_option("--corpus", flags.corpus, "JSONL task corpus path");
    cmd->add_option("--run-dir", flags.run_dir, "directory holding run folders");
    cmd->add_option("--run-id", flags.run_id, "run id (default: derived from config)");
    cmd->add_option("--seed", flags.seed, "RNG seed");
    cmd->add_option("--backend", flags.backend, "LLM backend")
        ->check(CLI::IsMember({"remote", "scripted"}));
    cmd->add_option("--n-outer", flags.n_outer, "outer loop iterations");
    cmd->add_option("--n-inner", flags.n_inner, "max inner updates per subtask");
    cmd->add_option("--epsilon", flags.epsilon, "continuation threshold");
    cmd->add_option("--clusters", flags.clusters, "validation subtask count m");
    cmd->add_option("--concurrency", flags.concurrency, "evaluation width");
    cmd->add_option("--stop-after-phase", flags.stop_after_phase,
                    "stop after marking this phase (testing hook)");
    cmd->add_option("--scripted-rules", flags.scripted_rules_file,
                    "JSON rules file for the scripted backend");
}

// File config + flag overrides merged into one engine config document.
json merged_config(const CommonFlags& flags, int* exit_code) {
    json config = json::object();
    if (!flags.config_path.empty()) {
        std::ifstream in(flags.config_path);
        if (!in) {
            std::cerr << "error: cannot read config file " << flags.config_path << "\n";
            *exit_code = kExitUsage;
            return config;
        }
        std::stringstream buf;
        buf << in.rdbuf();
        config = json::parse(buf.str(), nullptr, false);
        if (config.is_discarded() || !config.is_object()) {
            std::cerr << "error: config file is not a JSON object\n";
            *exit_code = kExitUsage;
            return json::object();
        }
    }
    if (!flags.corpus.empty()) config["corpus"] = flags.corpus;
    if (!flags.run_dir.empty()) config["run_dir"] = flags.run_dir;
    if (!flags.run_id.empty()) config["run_id"] = flags.run_id;
    if (flags.seed) config["seed"] = *flags.seed;
    if (!flags.backend.empty()) config["backend"] = flags.backend;
    if (flags.n_outer) config["optimizer"]["n_outer"] = *flags.n_outer;
    if (flags.n_inner) config["optimizer"]["n_inner"] = *flags.n_inner;
    if (flags.epsilon) config["optimizer"]["epsilon"] = *flags.epsilon;
    if (flags.clusters) config["clusters"]["m"] = *flags.clusters;
    if (flags.concurrency) config["concurrency"] = *flags.concurrency;
    if (!flags.stop_after_phase.empty()) config["stop_after_phase"] = flags.stop_after_phase;
    if (!flags.scripted_rules_file.empty())
        config["scripted_rules_file"] = flags.scripted_rules_file;
    *exit_code = kExitOk;
    return config;
}

class Engine {
  public:
    explicit Engine(const json& config) {
        status_ = mf_engine_create(config.dump().c_str(), &engine_);
    }
    ~Engine() { mf_engine_destroy(engine_); }
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    bool ok() const { return status_ == MF_OK; }
    mf_status status() const { return status_; }
    mf_engine* get() { return engine_; }

  private:
    mf_engine* engine_ = nullptr;
    mf_status status_ = MF_E_UNKNOWN;
};

// Config and usage problems exit 2; everything else that fails exits 1.
int exit_code_for(mf_status status) {
    switch (status) {
        case MF_OK:
            return kExitOk;
        case MF_E_CONFIG:
        case MF_E_INVALID_ARGUMENT:
        case MF_E_CORRUPT_RUN:
            return kExitUsage;
        default:
            return kExitRuntime;
    }
}

json take_json(char* raw) {
    json parsed = raw ? json::parse(raw, nullptr, false) : json();
    mf_string_free(raw);
    return parsed;
}

int report_failure(const char* what, mf_status status, mf_engine* engine) {
    // creation failures have no handle; mf_create_error() carries their detail
    const char* detail = engine ? mf_engine_last_error(engine) : mf_create_error();
    std::cerr << "error: " << what << " failed (" << mf_status_name(status) << ")";
    if (*detail) std::cerr << ": " << detail;
    std::cerr << "\n";
    return exit_code_for(status);
}

int run_cluster(const CommonFlags& flags) {
    int code = kExitOk;
    json config = merged_config(flags, &code);
    if (code != kExitOk) return code;
    Engine engine(config);
    if (!engine.ok()) return report_failure("cluster", engine.status(), nullptr);

    char* raw = nullptr;
    mf_status status = mf_engine_cluster(engine.get(), &raw);
    if (status != MF_OK) return report_failure("cluster", status, engine.get());
    json result = take_json(raw);

    std::cout << "run " << result.at("run_id").get<std::string>() << "\n";
    std::cout << "split: " << result.at("validation_size") << " validation / "
              << result.at("test_size") << " test\n";
    for (const char* side : {"validation_clusters", "test_clusters"}) {
        std::cout << side << ":\n";
        for (const auto& row : result.at(side)) {
            std::cout << "  cluster " << row.at("id").get<int>() << ": "
                      << row.at("size").get<size_t>() << " tasks";
            if (row.contains("label")) std::cout << " (" << row.at("label").get<std::string>() << ")";
            std::cout << "\n";
        }
    }
    return kExitOk;
}

int run_optimize(const CommonFlags& flags) {
    int code = kExitOk;
    json config = merged_config(flags, &code);
    if (code != kExitOk) return code;
    Engine engine(config);
    if (!engine.ok()) return report_failure("optimize", engine.status(), nullptr);

    char* raw = nullptr;
    mf_status status = mf_engine_optimize(engine.get(), &raw);
    if (status != MF_OK) return report_failure("optimize", status, engine.get());
    json result = take_json(raw);

    std::cout << "run " << result.at("run_id").get<std::string>() << "\n";
    std::cout << "best fitness per outer iteration:\n";
    for (const auto& row : result.at("fitness_table")) {
        std::printf("  outer %d: mean best %.4f (", row.at("outer").get<int>(),
                    row.at("mean_best").get<double>());
        bool first = true;
        for (const auto& [subtask, value] : row.at("best_per_subtask").items()) {
            if (!first) std::printf(", ");
            std::printf("t%s=%.2f", subtask.c_str(), value.get<double>());
            first = false;
        }
        std::printf(")\n");
    }
    if (result.contains("global_name")) {
        std::printf("final workflow: %s (mean fitness %.4f)\n",
                    result.at("global_name").get<std::string>().c_str(),
                    result.at("global_mean_fitness").get<double>());
    }
    std::cout << "optimizer calls: " << result.at("optimizer_ops") << " (bound "
              << result.at("budget_bound") << ")\n";
    if (result.contains("stopped_at")) {
        std::cout << "stopped after phase: " << result.at("stopped_at").get<std::string>()
                  << "\n";
    }
    return kExitOk;
}

int run_adapt_eval(const CommonFlags& flags, const std::string& run_id, bool no_adapt) {
    int code = kExitOk;
    json config = merged_config(flags, &code);
    if (code != kExitOk) return code;
    Engine engine(config);
    if (!engine.ok()) return report_failure("adapt-eval", engine.status(), nullptr);

    char* raw = nullptr;
    mf_status status = mf_engine_adapt_eval(engine.get(), run_id.empty() ? nullptr : run_id.c_str(),
                                            no_adapt ? 1 : 0, &raw);
    if (status != MF_OK) return report_failure("adapt-eval", status, engine.get());
    json result = take_json(raw);

    if (result.contains("stopped_at")) {
        std::cout << "stopped after phase: " << result.at("stopped_at").get<std::string>()
                  << "\n";
        return kExitOk;
    }
    const json& report = result.at("report");
    std::cout << "metric: " << report.at("metric").get<std::string>()
              << (no_adapt ? " (adaptation disabled)" : "") << "\n";
    for (const auto& row : report.at("rows")) {
        std::printf("  cluster %d (%zu tasks): %.4f  [%s]\n", row.at("cluster").get<int>(),
                    row.at("size").get<size_t>(), row.at("score").get<double>(),
                    row.at("workflow").get<std::string>().c_str());
    }
    std::printf("overall: %.4f\n", report.at("overall").get<double>());
    std::cout << "report: " << result.at("report_path").get<std::string>() << "\n";
    return kExitOk;
}

int run_report(const CommonFlags& flags, const std::string& run_id) {
    int code = kExitOk;
    json config = merged_config(flags, &code);
    if (code != kExitOk) return code;
    Engine engine(config);
    if (!engine.ok()) return report_failure("report", engine.status(), nullptr);

    char* raw = nullptr;
    mf_status status =
        mf_engine_report(engine.get(), run_id.empty() ? nullptr : run_id.c_str(), &raw);
    if (status != MF_OK) return report_failure("report", status, engine.get());
    json result = take_json(raw);

    std::cout << "run " << result.at("run_id").get<std::string>() << "\n";
    std::cout << "phases:";
    for (const auto& p : result.at("phases")) std::cout << " " << p.get<std::string>();
    std::cout << "\narchive:\n";
    for (const auto& e : result.at("entries")) {
        std::printf("  #%d %s gen(%d,%d) parent=%d mean=%.4f%s\n", e.at("id").get<int>(),
                    e.at("name").get<std::string>().c_str(),
                    e.at("generation").at("outer").get<int>(),
                    e.at("generation").at("inner").get<int>(), e.at("parent").get<int>(),
                    e.at("mean_fitness").get<double>(),
                    e.at("invalid").get<bool>() ? " [invalid]" : "");
    }
    std::cout << "outer series:";
    for (const auto& p : result.at("series").at("outer")) {
        std::printf(" %.4f", p.at("mean_best").get<double>());
    }
    std::cout << "\n" << result.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"metaflow: workflow meta-optimization engine"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string run_id;
    bool no_adapt = false;
    bool resume = false;

    CLI::App* cluster = app.add_subcommand("cluster", "split and cluster the corpus");
    add_common_flags(cluster, flags);

    CLI::App* optimize = app.add_subcommand("optimize", "run meta-optimization");
    add_common_flags(optimize, flags);
    optimize->add_flag("--resume", resume, "continue an interrupted run");
    optimize->add_option("run_id", run_id, "run id to resume")->expected(0, 1);

    CLI::App* adapt_eval =
        app.add_subcommand("adapt-eval", "test-time adaptation and evaluation");
    add_common_flags(adapt_eval, flags);
    adapt_eval->add_flag("--no-adapt", no_adapt, "evaluate the unadapted global workflow");
    adapt_eval->add_option("run_id", run_id, "run id to evaluate")->expected(0, 1);

    CLI::App* report = app.add_subcommand("report", "render archive and fitness trajectories");
    add_common_flags(report, flags);
    report->add_option("run_id", run_id, "run id to report on")->expected(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    // a positional run id doubles as the --run-id override so resume and
    // reporting hit the same run directory
    if (!run_id.empty()) flags.run_id = run_id;

    try {
        if (app.got_subcommand(cluster)) return run_cluster(flags);
        if (app.got_subcommand(optimize)) return run_optimize(flags);
        if (app.got_subcommand(adapt_eval)) return run_adapt_eval(flags, run_id, no_adapt);
        if (app.got_subcommand(report)) return run_report(flags, run_id);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
