#include "dsl/ast.hpp"

namespace mf::dsl {

const char* node_kind_name(NodeKind kind) {
    switch (kind) {
        case NodeKind::AgentCall: return "agent_call";
        case NodeKind::Fanout: return "fanout";
        case NodeKind::Extract: return "extract";
        case NodeKind::Vote: return "vote";
        case NodeKind::VerifyLoop: return "verify_loop";
        case NodeKind::Select: return "select";
        case NodeKind::Return: return "return";
    }
    return "?";
}

const AgentSpec* WorkflowProgram::find_agent(const std::string& agent_name) const {
    for (const auto& a : agents) {
        if (a.name == agent_name) return &a;
    }
    return nullptr;
}

std::vector<std::string> call_output_fields(const CallSpec& call, const WorkflowProgram& p) {
    if (!call.outputs.empty()) return call.outputs;
    if (const AgentSpec* a = p.find_agent(call.agent)) return a->output_fields;
    return {};
}

std::vector<std::string> node_output_fields(const NodeSpec& node, const WorkflowProgram& p) {
    switch (node.kind) {
        case NodeKind::AgentCall:
            return call_output_fields(node.call, p);
        case NodeKind::Fanout:
            return {};
        case NodeKind::Extract:
            return {"value"};
        case NodeKind::Vote:
            return {"winner"};
        case NodeKind::VerifyLoop:
            return node.verifier ? call_output_fields(*node.verifier, p)
                                 : std::vector<std::string>{};
        case NodeKind::Select:
            return node.chooser ? call_output_fields(*node.chooser, p)
                                : std::vector<std::string>{};
        case NodeKind::Return:
            return {};
    }
    return {};
}

}  // namespace mf::dsl
