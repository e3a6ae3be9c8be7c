#include "store/store.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>

namespace mf::store {
namespace fs = std::filesystem;

std::optional<double> ArchiveEntry::mean_fitness() const {
    if (fitness.empty()) return std::nullopt;
    double total = 0;
    for (const auto& [subtask, value] : fitness) total += value;
    return total / static_cast<double>(fitness.size());
}

json entry_to_json(const ArchiveEntry& entry) {
    json fitness = json::object();
    for (const auto& [subtask, value] : entry.fitness) {
        fitness[std::to_string(subtask)] = value;
    }
    return json{{"id", entry.id},
                {"name", entry.name},
                {"thought", entry.thought},
                {"program", dsl::render_program(entry.program)},
                {"fitness", fitness},
                {"generation", {{"outer", entry.generation.outer}, {"inner", entry.generation.inner}}},
                {"parent", entry.parent_id},
                {"invalid", entry.invalid},
                {"note", entry.note}};
}

ArchiveEntry entry_from_json(const json& j) {
    ArchiveEntry entry;
    entry.id = j.at("id").get<int>();
    entry.name = j.at("name").get<std::string>();
    entry.thought = j.at("thought").get<std::string>();
    entry.program = dsl::parse_program(j.at("program").get<std::string>());
    for (const auto& [key, value] : j.at("fitness").items()) {
        entry.fitness[std::stoi(key)] = value.get<double>();
    }
    entry.generation.outer = j.at("generation").at("outer").get<int>();
    entry.generation.inner = j.at("generation").at("inner").get<int>();
    entry.parent_id = j.at("parent").get<int>();
    entry.invalid = j.at("invalid").get<bool>();
    entry.note = j.at("note").get<std::string>();
    return entry;
}

namespace {

std::string entry_filename(int id) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d.json", id);
    return buf;
}

std::string now_iso8601() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%FT%TZ", std::gmtime(&t));
    return buf;
}

}  // namespace

RunStore::RunStore(fs::path dir, std::string run_id)
    : dir_(std::move(dir)), run_id_(std::move(run_id)) {}

RunStore RunStore::create(const fs::path& root, const std::string& run_id,
                          const json& config_snapshot) {
    fs::path dir = root / run_id;
    if (fs::exists(dir / "manifest.json"))
        fail(ErrorKind::StorageError, "run '" + run_id + "' already exists");
    fs::create_directories(dir / "archive");
    fs::create_directories(dir / "clusters");
    fs::create_directories(dir / "reports");
    RunStore store(dir, run_id);
    json manifest{{"run_id", run_id},
                  {"config", config_snapshot},
                  {"phases", json::array()},
                  {"finalized", false},
                  {"created", now_iso8601()},
                  {"updated", now_iso8601()}};
    store.write_manifest(manifest);
    write_file_atomic(dir / "archive.index", "");
    return store;
}

RunStore RunStore::open(const fs::path& root, const std::string& run_id) {
    fs::path dir = root / run_id;
    if (!fs::exists(dir / "manifest.json"))
        fail(ErrorKind::CorruptRun, "no manifest for run '" + run_id + "'");
    RunStore store(dir, run_id);
    store.read_manifest();  // throws CorruptRun if unreadable
    return store;
}

json RunStore::read_manifest() const {
    json j = json::parse(read_file(dir_ / "manifest.json"), nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::CorruptRun, "unparseable manifest.json");
    return j;
}

void RunStore::write_manifest(json manifest) const {
    manifest["updated"] = now_iso8601();
    write_file_atomic(dir_ / "manifest.json", json_dump_stable(manifest));
}

json RunStore::config_snapshot() const { return read_manifest().at("config"); }

void RunStore::require_writable() const {
    if (finalized()) fail(ErrorKind::StorageError, "Finalized: run is read-only");
}

int RunStore::append_entry(ArchiveEntry& entry) {
    require_writable();
    auto ids = entry_ids();
    entry.id = ids.empty() ? 0 : ids.back() + 1;
    write_file_atomic(dir_ / "archive" / entry_filename(entry.id),
                      json_dump_stable(entry_to_json(entry)));
    std::string index = ids.empty() ? "" : read_file(dir_ / "archive.index");
    index += entry_filename(entry.id) + "\n";
    write_file_atomic(dir_ / "archive.index", index);
    return entry.id;
}

void RunStore::update_entry(const ArchiveEntry& entry) {
    require_writable();
    fs::path path = dir_ / "archive" / entry_filename(entry.id);
    if (!fs::exists(path))
        fail(ErrorKind::StorageError, "cannot update unknown entry " + std::to_string(entry.id));
    write_file_atomic(path, json_dump_stable(entry_to_json(entry)));
}

ArchiveEntry RunStore::load_entry(int id) const {
    fs::path path = dir_ / "archive" / entry_filename(id);
    if (!fs::exists(path)) fail(ErrorKind::CorruptRun, "missing archive entry " + entry_filename(id));
    json j = json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::CorruptRun, "unparseable entry " + entry_filename(id));
    return entry_from_json(j);
}

std::vector<int> RunStore::entry_ids() const {
    std::vector<int> ids;
    std::istringstream in(read_file(dir_ / "archive.index"));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ids.push_back(std::stoi(line));
    }
    return ids;
}

ArchiveEntry RunStore::best_for_subtask(int subtask_id) const {
    std::optional<ArchiveEntry> best;
    for (int id : entry_ids()) {
        ArchiveEntry entry = load_entry(id);
        if (entry.invalid) continue;  // tombstones never win
        auto it = entry.fitness.find(subtask_id);
        if (it == entry.fitness.end()) continue;
        if (!best) {
            best = std::move(entry);
            continue;
        }
        double current = best->fitness.at(subtask_id);
        if (it->second > current ||
            (it->second == current && entry.generation < best->generation)) {
            best = std::move(entry);
        }
    }
    if (!best)
        fail(ErrorKind::NoScoredEntry,
             "no scored entry for subtask " + std::to_string(subtask_id));
    return *best;
}

void RunStore::mark_phase(const std::string& marker) {
    require_writable();
    if (has_phase(marker)) return;
    json manifest = read_manifest();
    manifest["phases"].push_back(marker);
    write_manifest(manifest);
}

std::vector<std::string> RunStore::phases() const {
    return read_manifest().at("phases").get<std::vector<std::string>>();
}

bool RunStore::has_phase(const std::string& marker) const {
    auto all = phases();
    return std::find(all.begin(), all.end(), marker) != all.end();
}

void RunStore::save_clusters(const std::string& name,
                             const std::vector<corpus::SubtaskCluster>& clusters) {
    require_writable();
    json arr = json::array();
    for (const auto& c : clusters) arr.push_back(corpus::cluster_to_json(c));
    write_file_atomic(dir_ / "clusters" / (name + ".json"), json_dump_stable(arr));
}

std::vector<corpus::SubtaskCluster> RunStore::load_clusters(const std::string& name) const {
    fs::path path = dir_ / "clusters" / (name + ".json");
    if (!fs::exists(path)) fail(ErrorKind::CorruptRun, "missing cluster manifest " + name);
    json arr = json::parse(read_file(path));
    std::vector<corpus::SubtaskCluster> out;
    for (const auto& j : arr) out.push_back(corpus::cluster_from_json(j));
    return out;
}

void RunStore::save_report(const std::string& name, const json& report) {
    require_writable();
    write_file_atomic(dir_ / "reports" / (name + ".json"), json_dump_stable(report));
}

json RunStore::load_report(const std::string& name) const {
    fs::path path = dir_ / "reports" / (name + ".json");
    if (!fs::exists(path)) fail(ErrorKind::CorruptRun, "missing report " + name);
    return json::parse(read_file(path));
}

void RunStore::finalize() {
    json manifest = read_manifest();
    manifest["finalized"] = true;
    write_manifest(manifest);
}

bool RunStore::finalized() const { return read_manifest().value("finalized", false); }

void RunStore::verify() const {
    for (int id : entry_ids()) load_entry(id);
}

}  // namespace mf::store
