#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mf::dsl {

// A dotted data reference: either "task.question" (the task input) or
// "<node>.<field>" naming an output field of an earlier node.
struct Ref {
    std::string node;
    std::string field;

    std::string str() const { return node + "." + field; }
    bool is_task() const { return node == "task"; }
    friend bool operator==(const Ref&, const Ref&) = default;
};

struct AgentSpec {
    std::string name;
    std::string role;
    double temperature = 0.5;
    std::vector<std::string> output_fields;

    friend bool operator==(const AgentSpec&, const AgentSpec&) = default;
};

// One LLM invocation: used directly by agent_call nodes and embedded in
// fanout children, vote tie-breakers, verify_loop verifiers and select
// choosers.
struct CallSpec {
    std::string id;  // empty for embedded calls without their own outputs
    std::string agent;
    std::string instruction;
    std::vector<Ref> inputs;
    std::vector<std::string> outputs;  // optional rename of the agent's output fields

    friend bool operator==(const CallSpec&, const CallSpec&) = default;
};

enum class NodeKind {
    AgentCall,
    Fanout,
    Extract,
    Vote,
    VerifyLoop,
    Select,
    Return,
};

const char* node_kind_name(NodeKind kind);

struct NodeSpec {
    std::string id;
    NodeKind kind = NodeKind::AgentCall;

    // agent_call
    CallSpec call;
    // fanout: children carry their own ids; outputs referenced as <child>.<field>
    std::vector<CallSpec> calls;
    // extract
    Ref from;
    std::vector<std::string> patterns;
    // vote: output field "winner"; ties go to the chooser if present,
    // else to the lexicographically smallest answer
    std::vector<Ref> over;
    std::optional<CallSpec> tie;
    // verify_loop: verifier runs each round; gate names the boolean
    // output field that exits the loop; body nodes re-run between rounds
    int max_rounds = 0;
    std::string gate;
    std::optional<CallSpec> verifier;
    std::vector<std::string> body;
    // select
    std::optional<CallSpec> chooser;
    std::vector<Ref> candidates;
    // return
    Ref ret;

    friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

struct WorkflowProgram {
    std::string name;
    std::string thought;
    std::string version = "1";
    std::vector<AgentSpec> agents;
    std::vector<NodeSpec> nodes;
    // entry is always the first node; kept explicit because tooling
    // reads it, validation enforces the equality
    std::string entry;

    const AgentSpec* find_agent(const std::string& name) const;
    friend bool operator==(const WorkflowProgram&, const WorkflowProgram&) = default;
};

// Output fields a node exposes under its own id. Fanout exposes nothing
// itself (children expose under their own ids); return exposes nothing.
std::vector<std::string> node_output_fields(const NodeSpec& node, const WorkflowProgram& p);

std::vector<std::string> call_output_fields(const CallSpec& call, const WorkflowProgram& p);

}  // namespace mf::dsl
