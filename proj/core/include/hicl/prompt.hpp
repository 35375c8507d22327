#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hicl::prompt {

/// Version tag of the template set below. Bump on any wording change.
inline constexpr std::string_view kTemplateVersion = "hicl-prompts/1";

/// Hash of the version tag and every template text; recorded in traces.
std::string template_hash();

/// One demonstration block at a given level.
struct DemoBlock {
  std::string text;
  std::string current_label;
  std::string answer;
};

/// Iterative per-level prompt: demo blocks (Text / Current Label / Answer)
/// then the query block (Text / Current Label / Candidate Label Set / Answer).
std::string level_prompt(const std::vector<DemoBlock>& demos, std::string_view query_text,
                         std::string_view current_label, const std::vector<std::string>& candidates);

/// Single-shot prompt whose answers and candidates are whole label paths.
std::string path_prompt(const std::vector<DemoBlock>& demos, std::string_view query_text,
                        const std::vector<std::string>& candidates);

/// Asks for the number (1-based) of the example most similar to the query.
std::string pick_example_prompt(const std::vector<std::string>& example_texts, std::string_view query_text);

/// Label description request. The label path is the final line.
std::string describe_prompt(std::string_view path_text);

/// Replaces each "{{name}}" with its value.
std::string render(std::string_view tmpl, const std::vector<std::pair<std::string_view, std::string>>& vars);

}  // namespace hicl::prompt
