#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dsl/program.hpp"
#include "fixture.hpp"
#include "store/store.hpp"

using namespace mf;
using namespace mf::store;

namespace {

ArchiveEntry entry(const std::string& name) {
    ArchiveEntry e;
    e.name = name;
    e.thought = "thought for " + name;
    e.program = dsl::seed_program();
    e.program.name = name;
    return e;
}

}  // namespace

TEST_CASE("append assigns monotone ids and load returns equal entries") {
    auto root = fixture::scratch_dir("store-append");
    auto store = RunStore::create(root, "run-a", json{{"seed", 1}});
    CHECK(store.run_id() == "run-a");
    CHECK(store.config_snapshot().at("seed") == 1);

    ArchiveEntry a = entry("first");
    a.fitness = {{0, 0.5}, {1, 0.25}};
    a.generation = {1, 2};
    a.parent_id = -1;
    ArchiveEntry b = entry("second");
    b.invalid = true;
    b.note = "parse failed";

    CHECK(store.append_entry(a) == 0);
    CHECK(store.append_entry(b) == 1);
    CHECK(store.entry_ids() == std::vector<int>{0, 1});

    ArchiveEntry back = store.load_entry(0);
    CHECK(back.id == 0);
    CHECK(back.name == a.name);
    CHECK(back.thought == a.thought);
    CHECK(back.program == a.program);
    CHECK(back.fitness == a.fitness);
    CHECK(back.generation == a.generation);
    CHECK(back.parent_id == -1);
    CHECK_FALSE(back.invalid);
    ArchiveEntry back_b = store.load_entry(1);
    CHECK(back_b.invalid);
    CHECK(back_b.note == "parse failed");
}

TEST_CASE("update_entry records fitness after evaluation") {
    auto root = fixture::scratch_dir("store-update");
    auto store = RunStore::create(root, "run-u", json::object());
    ArchiveEntry a = entry("scored_later");
    store.append_entry(a);
    a.fitness[3] = 0.75;
    store.update_entry(a);
    CHECK(store.load_entry(a.id).fitness.at(3) == 0.75);
}

TEST_CASE("open resumes an existing run and verify passes") {
    auto root = fixture::scratch_dir("store-open");
    {
        auto store = RunStore::create(root, "run-o", json{{"k", "v"}});
        ArchiveEntry a = entry("persisted");
        store.append_entry(a);
        store.mark_phase("clustered");
    }
    auto store = RunStore::open(root, "run-o");
    CHECK(store.entry_ids() == std::vector<int>{0});
    CHECK(store.load_entry(0).name == "persisted");
    CHECK(store.has_phase("clustered"));
    store.verify();
}

TEST_CASE("best_for_subtask prefers fitness, then earliest generation, then id") {
    auto root = fixture::scratch_dir("store-best");
    auto store = RunStore::create(root, "run-b", json::object());

    ArchiveEntry low = entry("low");
    low.fitness = {{0, 0.4}};
    low.generation = {0, 0};
    ArchiveEntry late_tie = entry("late_tie");
    late_tie.fitness = {{0, 0.8}};
    late_tie.generation = {2, 1};
    ArchiveEntry early_tie = entry("early_tie");
    early_tie.fitness = {{0, 0.8}};
    early_tie.generation = {1, 2};  // (1,2) beats (2,1): earlier outer wins
    ArchiveEntry unscored = entry("unscored");  // no fitness for subtask 0
    ArchiveEntry dead = entry("dead");
    dead.invalid = true;
    dead.fitness = {{0, 1.0}};  // tombstones never win

    store.append_entry(low);
    store.append_entry(late_tie);
    store.append_entry(early_tie);
    store.append_entry(unscored);
    store.append_entry(dead);

    CHECK(store.best_for_subtask(0).name == "early_tie");

    SUBCASE("identical generation falls back to lowest id") {
        ArchiveEntry same_gen = entry("same_gen");
        same_gen.fitness = {{0, 0.8}};
        same_gen.generation = {1, 2};
        store.append_entry(same_gen);
        CHECK(store.best_for_subtask(0).name == "early_tie");  // earlier id
    }
}

TEST_CASE("phases accumulate in order without duplicates") {
    auto root = fixture::scratch_dir("store-phases");
    auto store = RunStore::create(root, "run-p", json::object());
    CHECK_FALSE(store.has_phase("seeded"));
    store.mark_phase("clustered");
    store.mark_phase("seeded");
    store.mark_phase("seeded");
    CHECK(store.phases() == std::vector<std::string>{"clustered", "seeded"});
}

TEST_CASE("clusters and reports round-trip") {
    auto root = fixture::scratch_dir("store-clusters");
    auto store = RunStore::create(root, "run-c", json::object());
    corpus::SubtaskCluster c;
    c.id = 0;
    c.member_task_ids = {"a", "b"};
    c.label = "add";
    store.save_clusters("validation", {c});
    auto loaded = store.load_clusters("validation");
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0].member_task_ids == c.member_task_ids);

    store.save_report("evaluation", json{{"overall", 0.5}});
    CHECK(store.load_report("evaluation").at("overall") == 0.5);
}

TEST_CASE("finalized runs are read-only") {
    auto root = fixture::scratch_dir("store-final");
    auto store = RunStore::create(root, "run-f", json::object());
    ArchiveEntry a = entry("before");
    store.append_entry(a);
    store.finalize();
    CHECK(store.finalized());
    ArchiveEntry b = entry("after");
    try {
        store.append_entry(b);
        FAIL("expected StorageError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::StorageError);
        CHECK(std::string(e.what()).find("Finalized: run is read-only") != std::string::npos);
    }
    // reads still work
    CHECK(store.load_entry(0).name == "before");
}

TEST_CASE("missing indexed entry file is reported as CorruptRun") {
    auto root = fixture::scratch_dir("store-corrupt");
    {
        auto store = RunStore::create(root, "run-x", json::object());
        ArchiveEntry a = entry("doomed");
        store.append_entry(a);
    }
    std::filesystem::remove(root / "run-x" / "archive" / "000000.json");
    auto store = RunStore::open(root, "run-x");
    try {
        store.verify();
        FAIL("expected CorruptRun");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CorruptRun);
    }
}

TEST_CASE("opening a nonexistent run fails with CorruptRun") {
    auto root = fixture::scratch_dir("store-missing");
    try {
        RunStore::open(root, "no-such-run");
        FAIL("expected CorruptRun");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CorruptRun);
    }
}
