#include <doctest.h>

#include "dsl/interp.hpp"
#include "dsl/program.hpp"
#include "gateway/gateway.hpp"

using namespace mf;
using namespace mf::dsl;

namespace {

corpus::TaskInstance task(const std::string& q) {
    corpus::TaskInstance t;
    t.id = "t1";
    t.question = q;
    t.gold_answer = "42";
    return t;
}

gw::Gateway scripted(std::vector<gw::ScriptedRule> rules) {
    return gw::Gateway(gw::scripted_rule_set(std::move(rules)));
}

std::string resp(const std::string& thinking, const std::string& answer) {
    return json{{"thinking", thinking}, {"answer", answer}}.dump();
}

}  // namespace

TEST_CASE("seed program executes end to end and extracts the boxed answer") {
    auto gateway = scripted({{"What is 6 x 7", false, resp("6*7=42", "\\boxed{42}"), -1}});
    ExecutionLimits limits;
    auto trace = execute_program(seed_program(), task("What is 6 x 7?"), gateway, limits);
    CHECK(trace.final_answer.content == "42");
    CHECK(trace.backend_calls == 1);
    CHECK(trace.warnings.empty());
    CHECK(trace.steps.size() == 3);  // solve, boxed, out
    CHECK(trace.digest() ==
          execute_program(seed_program(), task("What is 6 x 7?"), gateway, limits).digest());
}

TEST_CASE("extract falls back to the raw field with a warning") {
    auto gateway = scripted({{"", false, resp("no box here", "the answer is unclear"), -1}});
    ExecutionLimits limits;
    WorkflowProgram p = seed_program();
    p.nodes[1].patterns = {R"(\\boxed\{([^}]*)\})"};  // no trailing-number fallback
    auto trace = execute_program(p, task("q"), gateway, limits);
    CHECK(trace.final_answer.content == "the answer is unclear");
    REQUIRE(trace.warnings.size() == 1);
    CHECK(trace.warnings[0] == "extraction_failed:boxed");
}

TEST_CASE("fanout plus vote resolves by majority") {
    std::string src = R"(workflow voting {
  version "1"
  agent solver {
    role "solver"
    temperature 0
    outputs [thinking, answer]
  }
  node branches fanout {
    call s1 {
      agent solver
      instruction "first"
      inputs [task.question]
    }
    call s2 {
      agent solver
      instruction "second"
      inputs [task.question]
    }
    call s3 {
      agent solver
      instruction "third"
      inputs [task.question]
    }
  }
  node consensus vote {
    over [s1.answer, s2.answer, s3.answer]
  }
  node out return {
    value consensus.winner
  }
}
)";
    auto gateway = scripted({
        {"first", false, resp("a", "7"), -1},
        {"second", false, resp("b", "9"), -1},
        {"third", false, resp("c", "7"), -1},
    });
    ExecutionLimits limits;
    auto trace = execute_program(parse_program(src), task("q"), gateway, limits);
    CHECK(trace.final_answer.content == "7");
    CHECK(trace.backend_calls == 3);
}

TEST_CASE("vote tie goes to the chooser when present, else lexicographic minimum") {
    std::string base = R"(workflow tied {
  version "1"
  agent solver {
    role "solver"
    temperature 0
    outputs [thinking, answer]
  }
  agent judge {
    role "judge"
    temperature 0
    outputs [choice]
  }
  node branches fanout {
    call s1 {
      agent solver
      instruction "first"
      inputs [task.question]
    }
    call s2 {
      agent solver
      instruction "second"
      inputs [task.question]
    }
  }
  node consensus vote {
    over [s1.answer, s2.answer]
TIE  }
  node out return {
    value consensus.winner
  }
}
)";
    std::vector<gw::ScriptedRule> rules = {
        {"first", false, resp("a", "beta"), -1},
        {"second", false, resp("b", "alpha"), -1},
        {"decide", false, json{{"choice", "beta"}}.dump(), -1},
    };
    ExecutionLimits limits;

    SUBCASE("with chooser") {
        std::string src = base;
        src.replace(src.find("TIE"), 3, R"(    tie {
      agent judge
      instruction "decide"
      inputs [task.question]
    }
)");
        auto gateway = scripted(rules);
        auto trace = execute_program(parse_program(src), task("q"), gateway, limits);
        CHECK(trace.final_answer.content == "beta");
        CHECK(trace.backend_calls == 3);
    }
    SUBCASE("without chooser") {
        std::string src = base;
        src.replace(src.find("TIE"), 3, "");
        auto gateway = scripted(rules);
        auto trace = execute_program(parse_program(src), task("q"), gateway, limits);
        CHECK(trace.final_answer.content == "alpha");  // lexicographic minimum
        CHECK(trace.backend_calls == 2);
    }
}

TEST_CASE("verify_loop exits on a truthy gate and re-runs the body otherwise") {
    std::string src = R"(workflow checked {
  version "1"
  agent solver {
    role "solver"
    temperature 0
    outputs [thinking, answer]
  }
  agent verifier {
    role "verifier"
    temperature 0
    outputs [ok]
  }
  node solve agent_call {
    agent solver
    instruction "attempt"
    inputs [task.question]
  }
  node check verify_loop {
    max_rounds 3
    gate ok
    verifier {
      agent verifier
      instruction "verify"
      inputs [solve.answer]
    }
    body [solve]
  }
  node out return {
    value solve.answer
  }
}
)";
    ExecutionLimits limits;

    SUBCASE("gate true: one verification round") {
        auto gateway = scripted({
            {"attempt", false, resp("a", "42"), -1},
            {"verify", false, json{{"ok", "yes"}}.dump(), -1},
        });
        auto trace = execute_program(parse_program(src), task("q"), gateway, limits);
        CHECK(trace.final_answer.content == "42");
        int verify_steps = 0;
        for (const auto& s : trace.steps)
            if (s.node_id == "check.verify") ++verify_steps;
        CHECK(verify_steps == 1);
    }
    SUBCASE("gate false: body re-runs until max_rounds") {
        auto gateway = scripted({
            {"attempt", false, resp("a", "41"), -1},
            {"verify", false, json{{"ok", "no"}}.dump(), -1},
        });
        auto trace = execute_program(parse_program(src), task("q"), gateway, limits);
        int verify_steps = 0, solve_steps = 0;
        for (const auto& s : trace.steps) {
            if (s.node_id == "check.verify") ++verify_steps;
            if (s.node_id == "solve") ++solve_steps;
        }
        CHECK(verify_steps == 3);       // max_rounds verifier passes
        CHECK(solve_steps == 1 + 2);    // initial run + re-runs between rounds
    }
}

TEST_CASE("select forwards candidates to the chooser") {
    std::string src = R"(workflow choosing {
  version "1"
  agent solver {
    role "solver"
    temperature 0
    outputs [thinking, answer]
  }
  agent judge {
    role "judge"
    temperature 0
    outputs [choice]
  }
  node solve agent_call {
    agent solver
    instruction "attempt"
    inputs [task.question]
  }
  node pick select {
    chooser {
      agent judge
      instruction "choose one"
      inputs [task.question]
    }
    candidates [solve.answer]
  }
  node out return {
    value pick.choice
  }
}
)";
    auto gateway = scripted({
        {"attempt", false, resp("a", "first candidate"), -1},
        // the chooser prompt must contain the candidate text
        {"choose one[\\s\\S]*first candidate", true, json{{"choice", "picked"}}.dump(), -1},
    });
    ExecutionLimits limits;
    auto trace = execute_program(parse_program(src), task("q"), gateway, limits);
    CHECK(trace.final_answer.content == "picked");
}

TEST_CASE("call budget exhaustion raises BudgetExceeded") {
    auto gateway = scripted({{"", false, resp("a", "\\boxed{1}"), -1}});
    ExecutionLimits limits;
    limits.max_calls = 0;
    try {
        execute_program(seed_program(), task("q"), gateway, limits);
        FAIL("expected BudgetExceeded");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BudgetExceeded);
    }
}

TEST_CASE("malformed agent output surfaces as BackendError") {
    auto gateway = scripted({{"", false, "not json at all", -1}});
    ExecutionLimits limits;
    try {
        execute_program(seed_program(), task("q"), gateway, limits);
        FAIL("expected BackendError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BackendError);
    }
}
