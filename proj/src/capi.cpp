#include "metaflow/metaflow.h"

#include <cstring>
#include <string>

#include "engine.hpp"

namespace {

struct EngineHandle {
    mf::Engine engine;
    std::string last_error;
};

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

mf_status status_of(const mf::Error& e) { return static_cast<mf_status>(e.kind()); }

std::string& create_error_storage() {
    static thread_local std::string storage;
    return storage;
}

// Runs fn, routing the result/diagnostic into the C out-parameters.
template <typename Fn>
mf_status guarded(EngineHandle* handle, char** result_json, Fn&& fn) {
    if (!handle || !result_json) return MF_E_INVALID_ARGUMENT;
    *result_json = nullptr;
    try {
        *result_json = dup_string(mf::json_dump_stable(fn()));
        handle->last_error.clear();
        return MF_OK;
    } catch (const mf::Error& e) {
        handle->last_error = e.what();
        return status_of(e);
    } catch (const std::exception& e) {
        handle->last_error = e.what();
        return MF_E_UNKNOWN;
    }
}

}  // namespace

extern "C" {

struct mf_engine : EngineHandle {};

const char* mf_status_name(mf_status status) {
    switch (status) {
        case MF_OK: return "ok";
        case MF_E_UNKNOWN: return "unknown";
        case MF_E_SYNTAX: return "syntax";
        case MF_E_UNKNOWN_NODE_KIND: return "unknown_node_kind";
        case MF_E_DANGLING_REFERENCE: return "dangling_reference";
        case MF_E_UNBOUNDED_LOOP: return "unbounded_loop";
        case MF_E_INVALID_PROGRAM: return "invalid_program";
        case MF_E_BUDGET_EXCEEDED: return "budget_exceeded";
        case MF_E_BACKEND_ERROR: return "backend_error";
        case MF_E_EXTRACTION_FAILED: return "extraction_failed";
        case MF_E_TRANSPORT: return "transport";
        case MF_E_RATE_LIMITED: return "rate_limited";
        case MF_E_AUTH: return "auth";
        case MF_E_SCRIPT_MISS: return "script_miss";
        case MF_E_MALFORMED_OUTPUT: return "malformed_output";
        case MF_E_FORMAT: return "format";
        case MF_E_DUPLICATE_ID: return "duplicate_id";
        case MF_E_TOO_FEW_TASKS: return "too_few_tasks";
        case MF_E_BAD_K: return "bad_k";
        case MF_E_EMBED_BACKEND: return "embed_backend";
        case MF_E_EMPTY_SUBTASK: return "empty_subtask";
        case MF_E_EXTERNAL_EVALUATOR_MISSING: return "external_evaluator_missing";
        case MF_E_STORAGE: return "storage";
        case MF_E_NO_SCORED_ENTRY: return "no_scored_entry";
        case MF_E_CORRUPT_RUN: return "corrupt_run";
        case MF_E_CONFIG: return "config";
        case MF_E_IO: return "io";
        case MF_E_INVALID_ARGUMENT: return "invalid_argument";
    }
    return "?";
}

mf_status mf_engine_create(const char* config_json, mf_engine** out) {
    if (!config_json || !out) return MF_E_INVALID_ARGUMENT;
    *out = nullptr;
    try {
        auto* handle = new mf_engine{{mf::Engine(config_json), {}}};
        *out = handle;
        create_error_storage().clear();
        return MF_OK;
    } catch (const mf::Error& e) {
        create_error_storage() = e.what();
        return status_of(e);
    } catch (const std::exception& e) {
        create_error_storage() = e.what();
        return MF_E_UNKNOWN;
    }
}

const char* mf_create_error(void) { return create_error_storage().c_str(); }

void mf_engine_destroy(mf_engine* engine) { delete engine; }

const char* mf_engine_last_error(const mf_engine* engine) {
    return engine ? engine->last_error.c_str() : "null engine handle";
}

const char* mf_engine_run_id(const mf_engine* engine) {
    // run id string lives as long as the handle
    static thread_local std::string storage;
    if (!engine) return "";
    storage = engine->engine.run_id();
    return storage.c_str();
}

mf_status mf_engine_cluster(mf_engine* engine, char** result_json) {
    return guarded(engine, result_json, [&] { return engine->engine.cmd_cluster(); });
}

mf_status mf_engine_optimize(mf_engine* engine, char** result_json) {
    return guarded(engine, result_json, [&] { return engine->engine.cmd_optimize(); });
}

mf_status mf_engine_adapt_eval(mf_engine* engine, const char* run_id, int no_adapt,
                               char** result_json) {
    std::string id = run_id ? run_id : "";
    return guarded(engine, result_json,
                   [&] { return engine->engine.cmd_adapt_eval(id, no_adapt != 0); });
}

mf_status mf_engine_report(mf_engine* engine, const char* run_id, char** result_json) {
    std::string id = run_id ? run_id : "";
    return guarded(engine, result_json, [&] { return engine->engine.cmd_report(id); });
}

mf_status mf_program_roundtrip(const char* source, int loop_cap, char** rendered_out) {
    if (!source || !rendered_out) return MF_E_INVALID_ARGUMENT;
    *rendered_out = nullptr;
    try {
        mf::dsl::WorkflowProgram program =
            mf::dsl::parse_program(source, loop_cap > 0 ? loop_cap : 4);
        *rendered_out = dup_string(mf::dsl::render_program(program));
        return MF_OK;
    } catch (const mf::Error& e) {
        *rendered_out = dup_string(e.what());
        return status_of(e);
    } catch (const std::exception& e) {
        *rendered_out = dup_string(e.what());
        return MF_E_UNKNOWN;
    }
}

mf_status mf_program_validate(const char* source, int loop_cap, char** violations_json) {
    if (!source || !violations_json) return MF_E_INVALID_ARGUMENT;
    *violations_json = nullptr;
    try {
        mf::dsl::WorkflowProgram program =
            mf::dsl::parse_program_unchecked(source);
        auto violations = mf::dsl::validate_program(program, loop_cap > 0 ? loop_cap : 4);
        mf::json arr = mf::json::array();
        for (const auto& v : violations) {
            arr.push_back(mf::json{{"node", v.node_id}, {"message", v.message}});
        }
        *violations_json = dup_string(mf::json_dump_stable(arr));
        return MF_OK;
    } catch (const mf::Error& e) {
        *violations_json = dup_string(e.what());
        return status_of(e);
    } catch (const std::exception& e) {
        *violations_json = dup_string(e.what());
        return MF_E_UNKNOWN;
    }
}

mf_status mf_seed_program(char** source_out) {
    if (!source_out) return MF_E_INVALID_ARGUMENT;
    *source_out = dup_string(mf::dsl::render_program(mf::dsl::seed_program()));
    return MF_OK;
}

void mf_string_free(char* s) { std::free(s); }

}  // extern "C"
