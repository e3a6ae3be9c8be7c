#include "opt/prompts.hpp"

namespace mf::opt {
namespace {

const std::string kDslExample = R"(workflow example_vote {
  version "1"
  thought "Three diverse solvers, majority vote over extracted answers."
  agent solver {
    role "You are a careful problem solver. Reason step by step."
    temperature 0.7
    outputs [thinking, answer]
  }
  agent decider {
    role "You pick the best candidate answer."
    temperature 0.1
    outputs [choice]
  }
  node branches fanout {
    call s1 {
      agent solver
      instruction "Solve the problem. Present the final answer using the \\boxed{} format."
      inputs [task.question]
    }
    call s2 {
      agent solver
      instruction "Solve the problem a different way. Present the final answer using the \\boxed{} format."
      inputs [task.question]
    }
    call s3 {
      agent solver
      instruction "Solve the problem carefully. Present the final answer using the \\boxed{} format."
      inputs [task.question]
    }
  }
  node e1 extract {
    from s1.answer
    patterns ["\\\\boxed\\{([^}]*)\\}"]
  }
  node e2 extract {
    from s2.answer
    patterns ["\\\\boxed\\{([^}]*)\\}"]
  }
  node e3 extract {
    from s3.answer
    patterns ["\\\\boxed\\{([^}]*)\\}"]
  }
  node consensus vote {
    over [e1.value, e2.value, e3.value]
    tie {
      agent decider
      instruction "Choose the best answer among the tied candidates."
      inputs [task.question]
    }
  }
  node out return {
    value consensus.winner
  }
}
)";

const std::string kDslRules = R"(Workflow DSL rules:
- A workflow is `workflow <name> { ... }` with optional `version`/`thought` strings, then agents, then nodes.
- `agent <name> { role "..." temperature <t> outputs [f1, f2] }` declares an LLM agent; temperature in [0,2].
- Node kinds: agent_call, fanout, extract, vote, verify_loop, select, return.
- Data references are `<node>.<field>` naming an output field of a strictly earlier node, or `task.question`.
- `extract` tries its regex patterns in order over the referenced field; its output field is `value`.
- `vote` needs at least two references; its output field is `winner`; an optional `tie { ... }` chooser breaks ties.
- `verify_loop` needs `max_rounds` (1..4), a `gate` naming a boolean output field of its verifier, and `body` listing earlier nodes to re-run when verification fails.
- `select` runs a chooser agent over `candidates` references.
- Exactly one `return` node, last, referencing the final answer field.
)";

const std::string kInnerTemplate = R"(# Overview
You are an expert machine learning researcher testing various agentic systems. Your objective is to design building blocks such as prompts and control flows within these systems to solve complex tasks. You design workflows as programs in a small workflow DSL.

# Subtask
[SUBTASK]

# Discovered architecture archive
Here is the archive of the discovered architectures:

[ARCHIVE]

The fitness value is defined as the accuracy on a validation question set. Your goal is to maximize this fitness. Use your own judgment on whether to build on the latest architecture, as its performance may not necessarily be better.

# Current evaluation
[CURRENT_EVAL]

# Output Instruction and Example
Reply with a JSON object. The first key should be ("thought"), and it should capture your thought process for designing the next workflow. The second key ("name") corresponds to the name of your next architecture. Finally, the last key ("code") contains the complete workflow in the DSL. You must write a COMPLETE workflow in "code".

Here is an example of the output "code" value:

[EXAMPLE]

[DSL_RULES]

# Your task
Observe the discovered architectures carefully and think about what insights, lessons, or stepping stones can be learned from them. Focus on the architecture with the optimal fitness and propose the most likely next architecture. Each optimization step can add one or two new modules to the current best solution, or propose an entirely novel solution, but keep each change relatively simple.
)";

const std::string kOuterTemplate = R"(# Overview
You are an expert machine learning researcher testing various agentic systems. Your objective is to design building blocks such as prompts and control flows within these systems to solve complex tasks. You design workflows as programs in a small workflow DSL.

The overall task is divided into subtasks. Below is the archive of the discovered architectures on each subtask.

[ARCHIVE_LIST]

The fitness value is defined as the accuracy on a validation question set. Your goal is to identify an architecture that either maximizes fitness across all subtasks or can quickly evolve toward that goal. Do not limit yourself to the most recently generated architectures.

# Output Instruction and Example
Reply with a JSON object. The first key should be ("thought"), the second key ("name") the name of the architecture, and the last key ("code") the complete workflow in the DSL.

Here is an example of the output "code" value:

[EXAMPLE]

[DSL_RULES]

# Your task
You are tasked with designing a new workflow based on the best-performing solutions from each subtask. The new architecture should either integrate key modules and features from the optimal solutions of individual subtasks into a generalizable architecture that performs well across all subtasks, or exhibit strong adaptability so it can quickly evolve toward the optimal solution for each specific subtask. Ensure the new workflow is not significantly more complex than the originals; you may remove redundant agent invocations.
)";

const std::string kReflectionTemplate = R"(We noticed that the current agent is prone to making mistakes when handling the following cases:
[CASE_LIST]

Please analyze the reasons for these mistakes and propose improvements.

Reply with a JSON object organized as follows:

"reflection": Provide your thoughts on the mistakes in the implementation, and suggest improvements.

"thought": Revise your previous proposal or propose a new architecture if necessary.

"name": Provide a name for the revised or new architecture. (Don't put words like "new" or "improved" in the name.)

"code": Provide the corrected workflow in the DSL. Make sure you actually implement your fix in this workflow.

[DSL_RULES]
)";

const std::string kAdaptTemplate = R"(# Overview
You are an expert machine learning researcher testing various agentic systems. Your objective is to design building blocks such as prompts and control flows within these systems to solve complex tasks. Analyze the characteristics of the problems below and design an agent capable of effectively solving them.

[TASK_DSC]

Note: Your goal is to design an improved agent based on the previous agent, tailored to the characteristics of the current task. We aim to rapidly enhance the performance of the current agent.

# Current workflow
[CURRENT_WORKFLOW]

# Output Instruction and Example
Reply with a JSON object with keys ("thought"), ("name") and ("code"); "code" contains the complete workflow in the DSL.

Here is an example of the output "code" value:

[EXAMPLE]

[DSL_RULES]

# Your task
Design a new workflow based on the previous agent to solve the current task.
)";

}  // namespace

const std::string& inner_template() { return kInnerTemplate; }
const std::string& outer_template() { return kOuterTemplate; }
const std::string& reflection_template() { return kReflectionTemplate; }
const std::string& adapt_template() { return kAdaptTemplate; }
const std::string& dsl_example() { return kDslExample; }
const std::string& dsl_rules() { return kDslRules; }

std::string fill_placeholder(std::string text, const std::string& placeholder,
                             const std::string& value) {
    size_t pos = 0;
    while ((pos = text.find(placeholder, pos)) != std::string::npos) {
        text.replace(pos, placeholder.size(), value);
        pos += value.size();
    }
    return text;
}

namespace {
std::string fill_common(std::string text) {
    text = fill_placeholder(std::move(text), "[EXAMPLE]", dsl_example());
    return fill_placeholder(std::move(text), "[DSL_RULES]", dsl_rules());
}
}  // namespace

std::string build_inner_prompt(const std::string& subtask_line, const std::string& archive_block,
                               const std::string& current_eval) {
    std::string text = fill_placeholder(inner_template(), "[SUBTASK]", subtask_line);
    text = fill_placeholder(std::move(text), "[ARCHIVE]", archive_block);
    text = fill_placeholder(std::move(text), "[CURRENT_EVAL]", current_eval);
    return fill_common(std::move(text));
}

std::string build_outer_prompt(const std::string& archive_list_block) {
    return fill_common(fill_placeholder(outer_template(), "[ARCHIVE_LIST]", archive_list_block));
}

std::string build_reflection_prompt(const std::string& case_list) {
    return fill_common(fill_placeholder(reflection_template(), "[CASE_LIST]", case_list));
}

std::string build_adapt_prompt(const std::string& task_description,
                               const std::string& current_workflow) {
    std::string text = fill_placeholder(adapt_template(), "[TASK_DSC]", task_description);
    text = fill_placeholder(std::move(text), "[CURRENT_WORKFLOW]", current_workflow);
    return fill_common(std::move(text));
}

}  // namespace mf::opt
