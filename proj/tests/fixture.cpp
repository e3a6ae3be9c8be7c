#include "fixture.hpp"

#include <cassert>
#include <random>
#include <stdexcept>

namespace fixture {
namespace {

using mf::json;

std::string regex_escape(const std::string& text) {
    static const std::string special = R"(\^$.|?*+()[]{})";
    std::string out;
    for (char c : text) {
        if (special.find(c) != std::string::npos) out += '\\';
        out += c;
    }
    return out;
}

std::string executor_response(long long answer) {
    return json{{"thinking", "computed directly"},
                {"answer", "\\boxed{" + std::to_string(answer) + "}"}}
        .dump();
}

std::string proposal_response(const std::string& name, const std::string& code,
                              bool with_reflection = false) {
    json j;
    if (with_reflection) j["reflection"] = "The failures cluster around the harder instances.";
    j["thought"] = "Staged proposal for the fixture scenario.";
    j["name"] = name;
    j["code"] = code;
    return j.dump();
}

struct RawTask {
    std::string topic;
    int index;
    long long a;
    long long b;
    long long answer;
    char op;
    int difficulty;  // 0 = always solved, 1 = needs skill, 2 = needs skill+mastery
};

Staged build() {
    Staged s;
    std::vector<RawTask> raw;
    const std::vector<std::string> topics = {"add", "mul", "sub"};
    for (const auto& topic : topics) {
        for (int i = 0; i < 20; ++i) {
            RawTask t;
            t.topic = topic;
            t.index = i;
            // i%5: 0,1 -> trivial; 2,3 -> skill; 4 -> skill+mastery
            t.difficulty = i % 5 <= 1 ? 0 : (i % 5 <= 3 ? 1 : 2);
            if (topic == "add") {
                t.a = 1000 + 37 * i;
                t.b = 2000 + 41 * i;
                t.op = '+';
                t.answer = t.a + t.b;
            } else if (topic == "sub") {
                t.a = 9000 + 53 * i;
                t.b = 1000 + 29 * i;
                t.op = '-';
                t.answer = t.a - t.b;
            } else {
                t.a = 103 + 3 * i;
                t.b = 211 + 7 * i;
                t.op = '*';
                t.answer = t.a * t.b;
            }
            raw.push_back(t);
        }
    }

    for (const auto& t : raw) {
        mf::corpus::TaskInstance task;
        char id[32];
        std::snprintf(id, sizeof(id), "%s-%02d", t.topic.c_str(), t.index);
        task.id = id;
        task.question = "topic:" + t.topic + " Compute " + std::to_string(t.a) + " " + t.op +
                        " " + std::to_string(t.b) + ".";
        task.gold_answer = std::to_string(t.answer);
        task.metadata["label"] = t.topic;
        s.tasks.push_back(task);
    }

    // the answer-leak criterion needs gold answers that never occur in
    // question text; fail construction loudly if the numbers collide
    for (const auto& a : s.tasks) {
        for (const auto& b : s.tasks) {
            if (b.question.find(a.gold_answer) != std::string::npos) {
                throw std::logic_error("fixture gold answer leaks into a question: " +
                                       a.gold_answer);
            }
        }
    }

    for (const auto& t : s.tasks) {
        json line{{"id", t.id}, {"question", t.question}, {"answer", t.gold_answer},
                  {"metadata", {{"label", t.metadata.at("label")}}}};
        s.corpus_jsonl += line.dump() + "\n";
    }

    // ---- scripted rules (ordered; all stateless so resumed runs see the
    // ---- same behavior as uninterrupted ones) --------------------------
    json rules = json::array();
    auto add_rule = [&rules](const std::string& match, bool regex, const std::string& response) {
        rules.push_back(json{{"match", match}, {"regex", regex}, {"response", response}});
    };

    // subtask describe calls: keyed on topic marker in the sampled questions
    for (const auto& topic : topics) {
        add_rule("topic:" + topic + R"([\s\S]*exactly these keys: "description")", true,
                 json{{"description", "Arithmetic word problems of one kind. The required "
                                      "specialization is adapt:" +
                                          topic + "."}}
                     .dump());
    }

    // test-time adaptation: keyed on the describe output above
    for (const auto& topic : topics) {
        add_rule("adapt:" + topic + R"([\s\S]*rapidly enhance)", true,
                 proposal_response(
                     "adapted_" + topic,
                     solver_workflow("adapted_" + topic,
                                     "skill:add skill:mul skill:sub mastery:" + topic + " ",
                                     /*extra_extract=*/true)));
    }

    // reflection: repairs the hard addition failure class
    add_rule("prone to making mistakes", false,
             proposal_response("reflected",
                               solver_workflow("reflected",
                                               "skill:add skill:mul skill:sub mastery:add "),
                               /*with_reflection=*/true));

    // outer aggregation: merges the per-subtask skills
    add_rule("best-performing solutions", false,
             proposal_response("unified",
                               solver_workflow("unified", "skill:add skill:mul skill:sub ")));

    // first inner proposal per subtask: fires only while the archive shown
    // in the prompt has no specialist for that topic yet
    for (const auto& topic : topics) {
        add_rule(R"(^(?![\s\S]*skill:)" + topic + R"()[\s\S]*# Subtask\nSubtask \d+ — topic: )" +
                     topic,
                 true,
                 proposal_response("specialist_" + topic,
                                   solver_workflow("specialist_" + topic,
                                                   "skill:" + topic + " ")));
    }

    // later inner proposals: an unspecialized probe that scores low, so
    // the continuation signal keeps the loop running to n_inner
    add_rule("Here is the archive of the discovered architectures", false,
             proposal_response("probe", solver_workflow("probe", "")));

    // executor: one rule per task, gated by the skill tokens the task's
    // difficulty demands; instruction text precedes the question in the
    // flattened prompt
    const std::string keys_suffix = R"([\s\S]*exactly these keys: "thinking", "answer")";
    for (size_t i = 0; i < raw.size(); ++i) {
        const RawTask& t = raw[i];
        std::string question = regex_escape(s.tasks[i].question);
        std::string gate;
        if (t.difficulty >= 1) gate += "skill:" + t.topic + R"([\s\S]*)";
        if (t.difficulty >= 2) gate += "mastery:" + t.topic + R"([\s\S]*)";
        add_rule(gate + question + keys_suffix, true, executor_response(t.answer));
    }

    // executor fallback: confidently wrong
    add_rule(R"(exactly these keys: "thinking", "answer")", true,
             json{{"thinking", "unsure"}, {"answer", "\\boxed{0}"}}.dump());

    s.rules = std::move(rules);
    return s;
}

}  // namespace

const Staged& staged() {
    static const Staged s = build();
    return s;
}

std::string solver_workflow(const std::string& name, const std::string& instruction_prefix,
                            bool extra_extract) {
    std::string instruction = instruction_prefix +
                              "Solve the problem. Present the final answer using the "
                              "\\\\boxed{} format.";
    std::string out = "workflow " + name + " {\n";
    out += "  version \"1\"\n";
    out += "  thought \"Staged single-solver workflow.\"\n";
    out += "  agent solver {\n";
    out += "    role \"You are a careful problem solver.\"\n";
    out += "    temperature 0.2\n";
    out += "    outputs [thinking, answer]\n";
    out += "  }\n";
    out += "  node solve agent_call {\n";
    out += "    agent solver\n";
    out += "    instruction \"" + instruction + "\"\n";
    out += "    inputs [task.question]\n";
    out += "  }\n";
    out += "  node boxed extract {\n";
    out += "    from solve.answer\n";
    out += "    patterns [\"\\\\\\\\boxed\\\\{([^}]*)\\\\}\"]\n";
    out += "  }\n";
    std::string final_node = "boxed";
    if (extra_extract) {
        out += "  node refine extract {\n";
        out += "    from boxed.value\n";
        out += "    patterns [\"([-0-9/.]+)\"]\n";
        out += "  }\n";
        final_node = "refine";
    }
    out += "  node out return {\n";
    out += "    value " + final_node + ".value\n";
    out += "  }\n";
    out += "}\n";
    return out;
}

mf::json staged_config(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const Staged& s = staged();
    mf::write_file_atomic(dir / "corpus.jsonl", s.corpus_jsonl);
    mf::write_file_atomic(dir / "rules.json", mf::json_dump_stable(s.rules));
    return mf::json{{"corpus", (dir / "corpus.jsonl").string()},
                    {"run_dir", (dir / "runs").string()},
                    {"seed", 7},
                    {"backend", "scripted"},
                    {"scripted_rules_file", (dir / "rules.json").string()},
                    {"clusters", {{"m", 3}, {"n", 3}, {"label_mode", true}}}};
}

std::filesystem::path scratch_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("metaflow_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace fixture
