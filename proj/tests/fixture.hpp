// Shared staged fixture: a synthetic arithmetic corpus plus a stateless
// scripted-backend rule table that walks the optimizer through a full
// seeded run (inner improvements, aggregation, reflection, adaptation).
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "common.hpp"
#include "corpus/corpus.hpp"

namespace fixture {

struct Staged {
    std::vector<mf::corpus::TaskInstance> tasks;  // 60 tasks, topics add/mul/sub
    std::string corpus_jsonl;
    mf::json rules;  // scripted backend rule table (stateless: times = -1)
};

// Built once; construction asserts no gold answer leaks into any
// question text (needed by the answer-leak criterion).
const Staged& staged();

// Canonical one-solver workflow used by the staged optimizer responses.
// instruction_prefix carries the skill/mastery tokens the executor rules
// key on; extra_extract adds a pass-through refinement node (the shape
// change test-time adaptation is staged to make).
std::string solver_workflow(const std::string& name, const std::string& instruction_prefix,
                            bool extra_extract = false);

// Writes corpus.jsonl and rules.json under dir and returns an engine
// config using them (scripted backend, label-mode clustering, seed 7).
mf::json staged_config(const std::filesystem::path& dir);

// Fresh scratch directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

}  // namespace fixture
