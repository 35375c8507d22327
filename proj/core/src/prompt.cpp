#include "hicl/prompt.hpp"

#include "hicl/io.hpp"

namespace hicl::prompt {

namespace {

constexpr std::string_view kLevelHeader =
    "Classify the last text into the next level of a label hierarchy.\n"
    "Each example shows a text, its current label, and the correct label one level below it.\n"
    "For the last text, answer with exactly one label from its Candidate Label Set.\n\n";

constexpr std::string_view kLevelDemo =
    "Text: {{text}}\n"
    "Current Label: {{current}}\n"
    "Answer: {{answer}}\n\n";

constexpr std::string_view kLevelQuery =
    "Text: {{text}}\n"
    "Current Label: {{current}}\n"
    "Candidate Label Set: {{candidates}}\n"
    "Answer:";

constexpr std::string_view kPathHeader =
    "Classify the last text into a full label path of a label hierarchy.\n"
    "Each example shows a text and its correct label path.\n"
    "For the last text, answer with exactly one label path from its Candidate Label Set.\n\n";

constexpr std::string_view kPathDemo =
    "Text: {{text}}\n"
    "Answer: {{answer}}\n\n";

constexpr std::string_view kPathQuery =
    "Text: {{text}}\n"
    "Candidate Label Set: {{candidates}}\n"
    "Answer:";

constexpr std::string_view kPickHeader =
    "Below are numbered example texts followed by a query text.\n"
    "Reply with the number of the example that is most similar to the query text.\n\n";

constexpr std::string_view kPickExample = "Example {{index}}: {{text}}\n\n";

constexpr std::string_view kPickQuery =
    "Query: {{text}}\n"
    "Most similar example number:";

constexpr std::string_view kDescribe =
    "Describe the following label of a hierarchical classification scheme in one or two sentences,\n"
    "explaining what kind of documents belong to it. The label path lists the label first and its\n"
    "ancestors after it.\n"
    "Label path:\n"
    "{{path}}";

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (const auto& s : items) {
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

}  // namespace

std::string template_hash() {
  std::string all(kTemplateVersion);
  for (std::string_view t : {kLevelHeader, kLevelDemo, kLevelQuery, kPathHeader, kPathDemo, kPathQuery, kPickHeader,
                             kPickExample, kPickQuery, kDescribe}) {
    all += '\x1f';
    all += t;
  }
  return fingerprint(all);
}

std::string render(std::string_view tmpl, const std::vector<std::pair<std::string_view, std::string>>& vars) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out += tmpl.substr(pos);
      break;
    }
    std::size_t close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out += tmpl.substr(pos);
      break;
    }
    out += tmpl.substr(pos, open - pos);
    std::string_view name = tmpl.substr(open + 2, close - open - 2);
    bool found = false;
    for (const auto& [key, value] : vars) {
      if (key == name) {
        out += value;
        found = true;
        break;
      }
    }
    if (!found) out += tmpl.substr(open, close + 2 - open);
    pos = close + 2;
  }
  return out;
}

std::string level_prompt(const std::vector<DemoBlock>& demos, std::string_view query_text,
                         std::string_view current_label, const std::vector<std::string>& candidates) {
  std::string out(kLevelHeader);
  for (const DemoBlock& d : demos) {
    out += render(kLevelDemo, {{"text", d.text}, {"current", d.current_label}, {"answer", d.answer}});
  }
  out += render(kLevelQuery, {{"text", std::string(query_text)},
                              {"current", std::string(current_label)},
                              {"candidates", join(candidates, "; ")}});
  return out;
}

std::string path_prompt(const std::vector<DemoBlock>& demos, std::string_view query_text,
                        const std::vector<std::string>& candidates) {
  std::string out(kPathHeader);
  for (const DemoBlock& d : demos) out += render(kPathDemo, {{"text", d.text}, {"answer", d.answer}});
  out += render(kPathQuery, {{"text", std::string(query_text)}, {"candidates", join(candidates, "; ")}});
  return out;
}

std::string pick_example_prompt(const std::vector<std::string>& example_texts, std::string_view query_text) {
  std::string out(kPickHeader);
  for (std::size_t i = 0; i < example_texts.size(); ++i) {
    out += render(kPickExample, {{"index", std::to_string(i + 1)}, {"text", example_texts[i]}});
  }
  out += render(kPickQuery, {{"text", std::string(query_text)}});
  return out;
}

std::string describe_prompt(std::string_view path_text) {
  return render(kDescribe, {{"path", std::string(path_text)}});
}

}  // namespace hicl::prompt
