#pragma once

#include <memory>
#include <string>

#include "common.hpp"
#include "corpus/corpus.hpp"
#include "gateway/gateway.hpp"
#include "opt/optimizer.hpp"
#include "store/store.hpp"

namespace mf {

// Top-level driver behind the C API: owns the parsed config, the
// gateway, and the command implementations the CLI exposes.
class Engine {
  public:
    // config_json is the merged config (file + flag overrides); see
    // README for the schema. Throws ConfigError on bad input.
    explicit Engine(const std::string& config_json);

    // Load + split + cluster the corpus and create the run directory.
    json cmd_cluster();
    // Run (or resume) the meta-optimization loop on the clustered run.
    json cmd_optimize();
    // Test phase: describe -> adapt -> evaluate; no_adapt evaluates the
    // global workflow directly (ablation).
    json cmd_adapt_eval(const std::string& run_id, bool no_adapt);
    // Render archive lineage and fitness trajectories for a run.
    json cmd_report(const std::string& run_id) const;

    const json& config() const { return config_; }
    std::string run_id() const { return run_id_; }
    gw::Gateway& gateway();

  private:
    opt::OptimizerConfig optimizer_config() const;
    store::RunStore open_run(const std::string& run_id) const;
    std::pair<std::vector<corpus::TaskInstance>, std::vector<corpus::TaskInstance>>
    load_and_split() const;

    json config_;
    std::string run_id_;
    std::filesystem::path run_root_;
    std::shared_ptr<gw::Gateway> gateway_;
};

// Validates + normalizes a config object, filling defaults. Exposed for
// tests.
json normalize_config(json config);

}  // namespace mf
