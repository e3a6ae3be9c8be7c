#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "corpus/corpus.hpp"
#include "dsl/program.hpp"

namespace mf::store {

struct Generation {
    int outer = 0;
    int inner = 0;
    friend auto operator<=>(const Generation&, const Generation&) = default;
};

struct ArchiveEntry {
    int id = -1;  // assigned on append, monotone within a run
    std::string name;
    std::string thought;
    dsl::WorkflowProgram program;
    std::map<int, double> fitness;  // subtask id -> [0,1]
    Generation generation;
    int parent_id = -1;
    bool invalid = false;   // tombstone for candidates that failed parse/validate
    std::string note;       // diagnostic for tombstones

    std::optional<double> mean_fitness() const;
};

// One directory per run: manifest.json, clusters/*.json, archive/*.json,
// archive.index, reports/*.json. Single writer, atomic appends.
class RunStore {
  public:
    static RunStore create(const std::filesystem::path& root, const std::string& run_id,
                           const json& config_snapshot);
    static RunStore open(const std::filesystem::path& root, const std::string& run_id);

    const std::string& run_id() const { return run_id_; }
    std::filesystem::path dir() const { return dir_; }
    json config_snapshot() const;

    int append_entry(ArchiveEntry& entry);
    void update_entry(const ArchiveEntry& entry);  // record fitness post-evaluation
    ArchiveEntry load_entry(int id) const;
    std::vector<int> entry_ids() const;

    // maximal-fitness scored entry for the subtask, ties broken by
    // earliest generation then lowest id
    ArchiveEntry best_for_subtask(int subtask_id) const;

    void mark_phase(const std::string& marker);
    std::vector<std::string> phases() const;
    bool has_phase(const std::string& marker) const;

    void save_clusters(const std::string& name,
                       const std::vector<corpus::SubtaskCluster>& clusters);
    std::vector<corpus::SubtaskCluster> load_clusters(const std::string& name) const;

    void save_report(const std::string& name, const json& report);
    json load_report(const std::string& name) const;

    void finalize();
    bool finalized() const;

    // consistency check used by resume: every indexed entry file loads
    void verify() const;

  private:
    RunStore(std::filesystem::path dir, std::string run_id);
    void require_writable() const;
    json read_manifest() const;
    void write_manifest(json manifest) const;

    std::filesystem::path dir_;
    std::string run_id_;
};

json entry_to_json(const ArchiveEntry& entry);
ArchiveEntry entry_from_json(const json& j);

}  // namespace mf::store
