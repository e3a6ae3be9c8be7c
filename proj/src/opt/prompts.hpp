#pragma once

#include <string>
#include <vector>

namespace mf::opt {

// Prompt templates with named placeholders [ARCHIVE], [ARCHIVE_LIST],
// [EXAMPLE], [CASE_LIST], [TASK_DSC], [SUBTASK], [CURRENT_EVAL],
// [CURRENT_WORKFLOW]. The raw templates are exposed so tests can check
// the assembled prompts against them.
const std::string& inner_template();
const std::string& outer_template();
const std::string& reflection_template();
const std::string& adapt_template();

// Minimal valid workflow in the DSL, used to fill [EXAMPLE].
const std::string& dsl_example();

// Grammar cheat-sheet appended to every optimizer prompt.
const std::string& dsl_rules();

std::string fill_placeholder(std::string text, const std::string& placeholder,
                             const std::string& value);

std::string build_inner_prompt(const std::string& subtask_line, const std::string& archive_block,
                               const std::string& current_eval);
std::string build_outer_prompt(const std::string& archive_list_block);
std::string build_reflection_prompt(const std::string& case_list);
std::string build_adapt_prompt(const std::string& task_description,
                               const std::string& current_workflow);

}  // namespace mf::opt
