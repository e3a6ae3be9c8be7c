#include <charconv>
#include <sstream>

#include "common.hpp"
#include "dsl/program.hpp"

namespace mf::dsl {
namespace {

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    out += '"';
    return out;
}

std::string number(double v) {
    // shortest round-trip form
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

class Writer {
  public:
    std::string finish() { return std::move(out_); }

    void line(int indent, const std::string& text) {
        out_.append(static_cast<size_t>(indent) * 2, ' ');
        out_ += text;
        out_ += '\n';
    }

  private:
    std::string out_;
};

std::string ident_list(const std::vector<std::string>& items) {
    std::string out = "[";
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += items[i];
    }
    return out + "]";
}

std::string ref_list(const std::vector<Ref>& items) {
    std::string out = "[";
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += items[i].str();
    }
    return out + "]";
}

std::string string_list(const std::vector<std::string>& items) {
    std::string out = "[";
    for (size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += quote(items[i]);
    }
    return out + "]";
}

void write_call_fields(Writer& w, int ind, const CallSpec& c) {
    w.line(ind, "agent " + c.agent);
    w.line(ind, "instruction " + quote(c.instruction));
    w.line(ind, "inputs " + ref_list(c.inputs));
    if (!c.outputs.empty()) w.line(ind, "outputs " + ident_list(c.outputs));
}

void write_embedded_call(Writer& w, int ind, const std::string& key, const CallSpec& c) {
    w.line(ind, key + " {");
    write_call_fields(w, ind + 1, c);
    w.line(ind, "}");
}

void write_node(Writer& w, const NodeSpec& n) {
    w.line(1, std::string("node ") + n.id + " " + node_kind_name(n.kind) + " {");
    switch (n.kind) {
        case NodeKind::AgentCall:
            write_call_fields(w, 2, n.call);
            break;
        case NodeKind::Fanout:
            for (const auto& c : n.calls) {
                w.line(2, "call " + c.id + " {");
                write_call_fields(w, 3, c);
                w.line(2, "}");
            }
            break;
        case NodeKind::Extract:
            w.line(2, "from " + n.from.str());
            w.line(2, "patterns " + string_list(n.patterns));
            break;
        case NodeKind::Vote:
            w.line(2, "over " + ref_list(n.over));
            if (n.tie) write_embedded_call(w, 2, "tie", *n.tie);
            break;
        case NodeKind::VerifyLoop:
            w.line(2, "max_rounds " + std::to_string(n.max_rounds));
            w.line(2, "gate " + n.gate);
            if (n.verifier) write_embedded_call(w, 2, "verifier", *n.verifier);
            w.line(2, "body " + ident_list(n.body));
            break;
        case NodeKind::Select:
            if (n.chooser) write_embedded_call(w, 2, "chooser", *n.chooser);
            w.line(2, "candidates " + ref_list(n.candidates));
            break;
        case NodeKind::Return:
            w.line(2, "value " + n.ret.str());
            break;
    }
    w.line(1, "}");
}

}  // namespace

std::string render_program(const WorkflowProgram& p) {
    Writer w;
    w.line(0, "workflow " + p.name + " {");
    w.line(1, "version " + quote(p.version));
    if (!p.thought.empty()) w.line(1, "thought " + quote(p.thought));
    for (const auto& a : p.agents) {
        w.line(1, "agent " + a.name + " {");
        w.line(2, "role " + quote(a.role));
        w.line(2, "temperature " + number(a.temperature));
        w.line(2, "outputs " + ident_list(a.output_fields));
        w.line(1, "}");
    }
    for (const auto& n : p.nodes) write_node(w, n);
    w.line(0, "}");
    return w.finish();
}

WorkflowProgram seed_program() {
    WorkflowProgram p;
    p.name = "seed_cot";
    p.thought =
        "Single chain-of-thought solver with boxed-answer extraction as the "
        "starting point for optimization.";

    AgentSpec solver;
    solver.name = "solver";
    solver.role = "You are a careful problem solver. Reason step by step.";
    solver.temperature = 0.5;
    solver.output_fields = {"thinking", "answer"};
    p.agents.push_back(solver);

    NodeSpec solve;
    solve.id = "solve";
    solve.kind = NodeKind::AgentCall;
    solve.call.id = "solve";
    solve.call.agent = "solver";
    solve.call.instruction =
        "Solve the following problem step by step. Present the final answer "
        "using the \\boxed{} format.";
    solve.call.inputs = {Ref{"task", "question"}};
    p.nodes.push_back(solve);

    NodeSpec boxed;
    boxed.id = "boxed";
    boxed.kind = NodeKind::Extract;
    boxed.from = Ref{"solve", "answer"};
    boxed.patterns = {
        R"(\\boxed\{([^}]*)\})",
        R"(([-+]?[0-9]+(?:\.[0-9]+)?(?:/[0-9]+)?)\s*$)",
    };
    p.nodes.push_back(boxed);

    NodeSpec ret;
    ret.id = "out";
    ret.kind = NodeKind::Return;
    ret.ret = Ref{"boxed", "value"};
    p.nodes.push_back(ret);

    p.entry = "solve";
    return p;
}

}  // namespace mf::dsl
