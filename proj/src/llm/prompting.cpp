#include "tape/prompting.hpp"

#include <nlohmann/json.hpp>

#include "tape/error.hpp"
#include "tape/io.hpp"

namespace tape {

std::string truncate_at_whitespace(const std::string& text, std::size_t budget) {
  if (text.size() <= budget) return text;
  std::size_t cut = std::string::npos;
  for (std::size_t i = budget; i-- > 0;) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      cut = i;
      break;
    }
  }
  if (cut == std::string::npos) {
    // No whitespace at all: hard cut, backing off to a UTF-8 boundary.
    cut = budget;
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  }
  return std::string(trim(std::string_view(text).substr(0, cut)));
}

std::string build_prompt(const NodeText& text, const PromptTemplate& tmpl,
                         std::size_t abstract_budget) {
  const std::string abstract_line = "Abstract: " + truncate_at_whitespace(text.abstract, abstract_budget);
  const std::string title_line = "Title: " + text.title;
  std::string prompt = tmpl.title_first ? title_line + "\n" + abstract_line
                                        : abstract_line + "\n" + title_line;
  prompt += "\nQuestion: " + tmpl.question_text + "\n\nAnswer:";
  return prompt;
}

const std::vector<PromptTemplate>& builtin_templates() {
  static const std::string kArxivHead =
      "Which arXiv CS sub-category does this paper belong to? Give 5 likely arXiv CS "
      "sub-categories as a comma-separated list ordered from most to least likely, in the form "
      "\"cs.XX\"";
  static const std::vector<PromptTemplate> templates = {
      {"cora",
       "Which of the following sub-categories of AI does this paper belong to: Case Based, "
       "Genetic Algorithms, Neural Networks, Probabilistic Methods, Reinforcement Learning, Rule "
       "Learning, Theory? If multiple options apply, provide a comma-separated list ordered from "
       "most to least related, then for each choice you gave, explain how it is present in the "
       "text.",
       7, false},
      {"pubmed",
       "Does the paper involve any cases of Type 1 diabetes, Type 2 diabetes, or Experimentally "
       "induced diabetes? Please give one or more answers of either Type 1 diabetes, Type 2 "
       "diabetes, or Experimentally induced diabetes; if multiple options apply, provide a "
       "comma-separated list ordered from most to least related, then for each choice you gave, "
       "give a detailed explanation with quotes from the text explaining why it is related to "
       "the chosen option.",
       3, false},
      {"ogbn-arxiv", kArxivHead + ", and provide your reasoning.", 5, false},
      {"ogbn-arxiv/title-first", kArxivHead + ", and provide your reasoning.", 5, true},
      {"ogbn-arxiv/focus-on-text",
       kArxivHead +
           ". Focus only on content in the actual text and avoid making false associations. Then "
           "provide your reasoning.",
       5, true},
      {"ogbn-arxiv/chain-of-thought",
       kArxivHead +
           ". Please think about the categorization in a step by step manner and avoid making "
           "false associations. Then provide your reasoning.",
       5, true},
  };
  return templates;
}

std::vector<PromptTemplate> template_variants(const std::string& family) {
  std::vector<PromptTemplate> out;
  for (const auto& t : builtin_templates())
    if (t.template_id == family || t.template_id.rfind(family + "/", 0) == 0) out.push_back(t);
  return out;
}

const PromptTemplate& builtin_template(const std::string& template_id) {
  for (const auto& t : builtin_templates())
    if (t.template_id == template_id) return t;
  throw ConfigError("unknown prompt template '" + template_id + "'");
}

PromptTemplate load_template(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  PromptTemplate t;
  try {
    t.template_id = doc.at("template_id").get<std::string>();
    t.question_text = doc.at("question_text").get<std::string>();
    t.expected_k = doc.at("expected_k").get<std::size_t>();
    t.title_first = doc.value("title_first", false);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (t.question_text.empty()) throw ConfigError(path.string() + ": question_text is empty");
  if (t.expected_k < 1) throw ConfigError(path.string() + ": expected_k must be >= 1");
  return t;
}

void save_template(const PromptTemplate& tmpl, const std::filesystem::path& path) {
  const nlohmann::json doc = {{"template_id", tmpl.template_id},
                              {"question_text", tmpl.question_text},
                              {"expected_k", tmpl.expected_k},
                              {"title_first", tmpl.title_first}};
  write_file_atomic(path, doc.dump(2) + "\n");
}

PromptTemplate topic_template(const LabelSpace& labels, std::size_t k) {
  std::string names;
  for (std::size_t i = 0; i < labels.size(); ++i) names += (i ? ", " : "") + labels[i].name;
  PromptTemplate t;
  t.template_id = "topics";
  t.expected_k = k;
  t.question_text = "Which of the following topics does this document belong to: " + names +
                    "? Give " + std::to_string(k) +
                    " likely topics as a comma-separated list ordered from most to least likely, "
                    "and provide your reasoning.";
  return t;
}

}  // namespace tape
