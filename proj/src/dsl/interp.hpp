#pragma once

#include <string>
#include <vector>

#include "corpus/corpus.hpp"
#include "dsl/program.hpp"
#include "gateway/gateway.hpp"

namespace mf::dsl {

struct InfoRecord {
    std::string field_name;
    std::string author;  // agent name + role
    std::string content;
    int iteration = 0;  // -1 reserved for synthetic records
};

struct ExecutionLimits {
    int max_calls = 64;
    double max_wall_ms = 300000.0;
    std::string model = "executor";
    long long seed = 0;
};

struct TraceStep {
    std::string node_id;
    std::string request_digest;
    std::vector<InfoRecord> records;
};

struct ExecutionTrace {
    std::string task_id;
    std::vector<TraceStep> steps;
    InfoRecord final_answer;
    int backend_calls = 0;  // equals the number of agent_call executions
    double wall_ms = 0.0;
    std::vector<std::string> warnings;

    std::string digest() const;
};

// Runs a validated program on one task. Deterministic given a scripted
// backend and fixed seed.
ExecutionTrace execute_program(const WorkflowProgram& program, const corpus::TaskInstance& task,
                               gw::Gateway& gateway, const ExecutionLimits& limits);

}  // namespace mf::dsl
