#include "dsl/interp.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <regex>

namespace mf::dsl {
namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool truthy(const std::string& s) {
    std::string t = trim(s);
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return t == "true" || t == "yes" || t == "1" || t == "correct";
}

class Interp {
  public:
    Interp(const WorkflowProgram& p, const corpus::TaskInstance& task, gw::Gateway& gw,
           const ExecutionLimits& limits)
        : p_(p), task_(task), gw_(gw), limits_(limits) {
        start_ = std::chrono::steady_clock::now();
        trace_.task_id = task.id;
        task_question_ = {"question", "task", task_.question, -1};
        task_id_ = {"id", "task", task_.id, -1};
    }

    ExecutionTrace run() {
        for (size_t i = 0; i < p_.nodes.size(); ++i) exec_node(p_.nodes[i], 0);
        trace_.wall_ms = elapsed_ms();
        return std::move(trace_);
    }

  private:
    double elapsed_ms() const {
        return std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

    void check_budget() {
        if (trace_.backend_calls >= limits_.max_calls)
            fail(ErrorKind::BudgetExceeded,
                 "backend call budget of " + std::to_string(limits_.max_calls) + " exhausted");
        if (elapsed_ms() > limits_.max_wall_ms)
            fail(ErrorKind::BudgetExceeded, "wall time budget exhausted");
    }

    const InfoRecord& lookup(const Ref& r) {
        if (r.is_task()) {
            if (r.field == "question") return task_question_;
            return task_id_;
        }
        auto node_it = env_.find(r.node);
        if (node_it != env_.end()) {
            auto field_it = node_it->second.find(r.field);
            if (field_it != node_it->second.end()) return field_it->second;
        }
        fail(ErrorKind::DanglingReference, "no value for reference \"" + r.str() + "\"");
    }

    void publish(const std::string& owner, InfoRecord record) {
        env_[owner][record.field_name] = std::move(record);
    }

    // One LLM invocation; records go into env under `owner`.
    std::vector<InfoRecord> exec_call(const CallSpec& call, const std::string& owner,
                                      int iteration, const std::vector<Ref>& extra_inputs,
                                      TraceStep& step) {
        check_budget();
        const AgentSpec* agent = p_.find_agent(call.agent);
        if (!agent) fail(ErrorKind::InvalidProgram, "unknown agent '" + call.agent + "'");

        std::string user = call.instruction;
        auto append_input = [&](const Ref& r) {
            const InfoRecord& rec = lookup(r);
            if (r.is_task() && r.field == "question") {
                user += "\n\nTask:\n" + rec.content;
            } else {
                user += "\n\n[" + rec.field_name + "] by " + rec.author + ":\n" + rec.content;
            }
        };
        for (const auto& r : call.inputs) append_input(r);
        for (const auto& r : extra_inputs) append_input(r);

        auto fields = call_output_fields(call, p_);
        std::string keys;
        for (const auto& f : fields) keys += (keys.empty() ? "" : ", ") + ("\"" + f + "\"");
        user += "\n\nRespond with a JSON object with exactly these keys: " + keys + ".";

        gw::ChatRequest req;
        req.model = limits_.model;
        req.temperature = agent->temperature;
        req.seed = limits_.seed;
        req.messages = {{"system", agent->role}, {"user", user}};

        step.request_digest = req.cache_key();
        ++trace_.backend_calls;

        std::map<std::string, std::string> values;
        try {
            values = gw::complete_structured(gw_, req, fields);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::MalformedOutput)
                fail(ErrorKind::BackendError,
                     std::string("agent '") + call.agent + "': " + e.what());
            throw;
        }

        std::vector<InfoRecord> records;
        for (const auto& f : fields) {
            InfoRecord rec{f, agent->name + " (" + agent->role + ")", values.at(f), iteration};
            if (!owner.empty()) publish(owner, rec);
            records.push_back(std::move(rec));
        }
        step.records = records;
        return records;
    }

    void exec_node(const NodeSpec& n, int iteration) {
        TraceStep step;
        step.node_id = n.id;
        switch (n.kind) {
            case NodeKind::AgentCall:
                exec_call(n.call, n.id, iteration, {}, step);
                break;
            case NodeKind::Fanout:
                for (const auto& c : n.calls) {
                    TraceStep sub;
                    sub.node_id = c.id;
                    exec_call(c, c.id, iteration, {}, sub);
                    trace_.steps.push_back(std::move(sub));
                }
                trace_.steps.push_back(std::move(step));
                return;
            case NodeKind::Extract:
                exec_extract(n, iteration, step);
                break;
            case NodeKind::Vote:
                exec_vote(n, iteration, step);
                break;
            case NodeKind::VerifyLoop:
                exec_verify_loop(n, step);
                break;
            case NodeKind::Select: {
                std::vector<Ref> extra = n.candidates;
                exec_call(*n.chooser, n.id, iteration, extra, step);
                break;
            }
            case NodeKind::Return: {
                trace_.final_answer = lookup(n.ret);
                step.records = {trace_.final_answer};
                break;
            }
        }
        trace_.steps.push_back(std::move(step));
    }

    void exec_extract(const NodeSpec& n, int iteration, TraceStep& step) {
        const InfoRecord& source = lookup(n.from);
        std::string value;
        bool matched = false;
        for (const auto& pat : n.patterns) {
            std::smatch m;
            if (std::regex_search(source.content, m, std::regex(pat))) {
                value = m.size() > 1 && m[1].matched ? m[1].str() : m[0].str();
                matched = true;
                break;
            }
        }
        if (!matched) {
            // fallback chain: raw field content with a warning, not an abort
            value = source.content;
            trace_.warnings.push_back("extraction_failed:" + n.id);
        }
        InfoRecord rec{"value", n.id + " (extract)", trim(value), iteration};
        publish(n.id, rec);
        step.request_digest = digest_hex(source.content);
        step.records = {rec};
    }

    void exec_vote(const NodeSpec& n, int iteration, TraceStep& step) {
        std::map<std::string, int> counts;
        std::vector<std::string> answers;
        for (const auto& r : n.over) {
            std::string a = trim(lookup(r).content);
            answers.push_back(a);
            ++counts[a];
        }
        int best = 0;
        for (const auto& [answer, count] : counts) best = std::max(best, count);
        std::vector<std::string> tied;
        for (const auto& [answer, count] : counts) {
            if (count == best) tied.push_back(answer);
        }
        std::string winner;
        if (tied.size() == 1) {
            winner = tied.front();
        } else if (n.tie) {
            TraceStep sub;
            sub.node_id = n.id + ".tie";
            auto records = exec_call(*n.tie, "", iteration, n.over, sub);
            trace_.steps.push_back(std::move(sub));
            winner = trim(records.back().content);
        } else {
            winner = *std::min_element(tied.begin(), tied.end());
        }
        InfoRecord rec{"winner", n.id + " (vote)", winner, iteration};
        publish(n.id, rec);
        std::string blob;
        for (const auto& a : answers) blob += a + "\x1f";
        step.request_digest = digest_hex(blob);
        step.records = {rec};
    }

    void exec_verify_loop(const NodeSpec& n, TraceStep& step) {
        for (int round = 1; round <= n.max_rounds; ++round) {
            TraceStep sub;
            sub.node_id = n.id + ".verify";
            auto records = exec_call(*n.verifier, n.id, round, {}, sub);
            trace_.steps.push_back(std::move(sub));
            std::string gate_value;
            for (const auto& rec : records) {
                if (rec.field_name == n.gate) gate_value = rec.content;
            }
            if (truthy(gate_value)) break;
            if (round == n.max_rounds) break;
            for (const auto& body_id : n.body) {
                for (const auto& prev : p_.nodes) {
                    if (prev.id == body_id) {
                        exec_node(prev, round);
                        break;
                    }
                }
            }
        }
        step.request_digest = digest_hex(n.id);
    }

    const WorkflowProgram& p_;
    const corpus::TaskInstance& task_;
    gw::Gateway& gw_;
    const ExecutionLimits& limits_;
    std::chrono::steady_clock::time_point start_;
    ExecutionTrace trace_;
    std::map<std::string, std::map<std::string, InfoRecord>> env_;
    InfoRecord task_question_;
    InfoRecord task_id_;
};

}  // namespace

std::string ExecutionTrace::digest() const {
    std::string blob = task_id + "\x1e";
    for (const auto& s : steps) {
        blob += s.node_id + "\x1f" + s.request_digest + "\x1f";
        for (const auto& r : s.records) {
            blob += r.field_name + "=" + r.content + ";";
        }
        blob += "\x1e";
    }
    blob += final_answer.content;
    return digest_hex(blob);
}

ExecutionTrace execute_program(const WorkflowProgram& program, const corpus::TaskInstance& task,
                               gw::Gateway& gateway, const ExecutionLimits& limits) {
    return Interp(program, task, gateway, limits).run();
}

}  // namespace mf::dsl
