#include <map>
#include <regex>
#include <set>

#include "common.hpp"
#include "dsl/program.hpp"

namespace mf::dsl {
namespace {

struct Scope {
    // node or fanout-child id -> output fields visible to later nodes
    std::map<std::string, std::set<std::string>> fields;

    bool has(const Ref& r) const {
        if (r.node == "task") return r.field == "question" || r.field == "id";
        auto it = fields.find(r.node);
        return it != fields.end() && it->second.count(r.field) > 0;
    }
};

class Validator {
  public:
    Validator(const WorkflowProgram& p, int loop_cap) : p_(p), loop_cap_(loop_cap) {}

    std::vector<Violation> run() {
        check_agents();
        check_ids();
        if (p_.nodes.empty()) {
            add("", "program has no nodes");
            return report_;
        }
        if (p_.entry != p_.nodes.front().id) {
            add("", "entry must be the first node");
        }
        for (const auto& n : p_.nodes) check_node(n);
        check_return_shape();
        return report_;
    }

  private:
    void add(const std::string& node_id, std::string msg) {
        report_.push_back({node_id, std::move(msg)});
    }

    void check_agents() {
        std::set<std::string> names;
        for (const auto& a : p_.agents) {
            if (!names.insert(a.name).second) add("", "duplicate agent '" + a.name + "'");
            if (a.output_fields.empty()) add("", "agent '" + a.name + "' has no output fields");
            std::set<std::string> fields(a.output_fields.begin(), a.output_fields.end());
            if (fields.size() != a.output_fields.size())
                add("", "agent '" + a.name + "' has duplicate output fields");
            if (a.temperature < 0.0 || a.temperature > 2.0)
                add("", "agent '" + a.name + "' temperature out of [0,2]");
        }
    }

    void check_ids() {
        std::set<std::string> ids{"task"};
        auto claim = [&](const std::string& id, const std::string& owner) {
            if (id.empty()) {
                add(owner, "empty id");
            } else if (!ids.insert(id).second) {
                add(owner, "duplicate id '" + id + "'");
            }
        };
        for (const auto& n : p_.nodes) {
            claim(n.id, n.id);
            if (n.kind == NodeKind::Fanout) {
                for (const auto& c : n.calls) claim(c.id, n.id);
            }
        }
    }

    void check_ref(const std::string& node_id, const Ref& r) {
        if (!scope_.has(r)) add(node_id, "dangling reference \"" + r.str() + "\"");
    }

    void check_call(const std::string& node_id, const CallSpec& c, bool needs_outputs) {
        const AgentSpec* a = p_.find_agent(c.agent);
        if (!a) {
            add(node_id, "unknown agent '" + c.agent + "'");
        } else if (!c.outputs.empty() && c.outputs.size() != a->output_fields.size()) {
            add(node_id, "outputs rename arity mismatch for agent '" + c.agent + "'");
        }
        if (needs_outputs && call_output_fields(c, p_).empty())
            add(node_id, "call has no output fields");
        for (const auto& r : c.inputs) check_ref(node_id, r);
    }

    void check_node(const NodeSpec& n) {
        switch (n.kind) {
            case NodeKind::AgentCall:
                check_call(n.id, n.call, true);
                break;
            case NodeKind::Fanout:
                if (n.calls.empty()) add(n.id, "fanout has no calls");
                for (const auto& c : n.calls) check_call(n.id, c, true);
                break;
            case NodeKind::Extract:
                check_ref(n.id, n.from);
                if (n.patterns.empty()) add(n.id, "extract pattern list is empty");
                for (const auto& pat : n.patterns) {
                    try {
                        std::regex re(pat);
                    } catch (const std::regex_error& e) {
                        add(n.id, "bad pattern \"" + pat + "\": " + e.what());
                    }
                }
                break;
            case NodeKind::Vote:
                if (n.over.size() < 2) add(n.id, "vote arity < 2");
                for (const auto& r : n.over) check_ref(n.id, r);
                if (n.tie) check_call(n.id, *n.tie, true);
                break;
            case NodeKind::VerifyLoop: {
                if (n.max_rounds < 1) {
                    add(n.id, "max_rounds must be >= 1");
                } else if (n.max_rounds > loop_cap_) {
                    add(n.id, "max_rounds exceeds the global cap of " +
                                  std::to_string(loop_cap_));
                }
                if (!n.verifier) {
                    add(n.id, "verify_loop has no verifier");
                } else {
                    check_call(n.id, *n.verifier, true);
                    auto fields = call_output_fields(*n.verifier, p_);
                    if (std::find(fields.begin(), fields.end(), n.gate) == fields.end())
                        add(n.id, "gate '" + n.gate + "' is not a verifier output field");
                }
                if (n.body.empty()) add(n.id, "verify_loop body is empty");
                for (const auto& b : n.body) {
                    bool found = false;
                    for (const auto& prev : p_.nodes) {
                        if (&prev == &n) break;
                        if (prev.id == b) {
                            found = true;
                            if (prev.kind == NodeKind::Return || prev.kind == NodeKind::VerifyLoop)
                                add(n.id, "body node '" + b + "' has kind " +
                                              node_kind_name(prev.kind));
                            break;
                        }
                    }
                    if (!found) add(n.id, "body names unknown or later node '" + b + "'");
                }
                break;
            }
            case NodeKind::Select:
                if (!n.chooser) {
                    add(n.id, "select has no chooser");
                } else {
                    check_call(n.id, *n.chooser, true);
                }
                if (n.candidates.empty()) add(n.id, "select has no candidates");
                for (const auto& r : n.candidates) check_ref(n.id, r);
                break;
            case NodeKind::Return:
                check_ref(n.id, n.ret);
                break;
        }
        // publish this node's outputs for later nodes
        if (n.kind == NodeKind::Fanout) {
            for (const auto& c : n.calls) {
                auto fields = call_output_fields(c, p_);
                scope_.fields[c.id].insert(fields.begin(), fields.end());
            }
        } else {
            auto fields = node_output_fields(n, p_);
            scope_.fields[n.id].insert(fields.begin(), fields.end());
        }
    }

    void check_return_shape() {
        size_t returns = 0;
        for (const auto& n : p_.nodes) {
            if (n.kind == NodeKind::Return) ++returns;
        }
        if (returns != 1) {
            add("", "program must have exactly one return node, found " +
                        std::to_string(returns));
        } else if (p_.nodes.back().kind != NodeKind::Return) {
            add(p_.nodes.back().id, "return must be the last node");
        }
    }

    const WorkflowProgram& p_;
    int loop_cap_;
    Scope scope_;
    std::vector<Violation> report_;
};

}  // namespace

std::vector<Violation> validate_program(const WorkflowProgram& p, int loop_cap) {
    return Validator(p, loop_cap).run();
}

}  // namespace mf::dsl
