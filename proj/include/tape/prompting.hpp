#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tape/graph.hpp"

namespace tape {

struct PromptTemplate {
  std::string template_id;
  std::string question_text;
  std::size_t expected_k = 1;
  // Emit the title line before the abstract line.
  bool title_first = false;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

inline constexpr std::size_t kDefaultAbstractBudget = 6000;

// "Abstract: {abstract}\nTitle: {title}\nQuestion: {question}\n\nAnswer:"
// (title line first when template.title_first). Abstracts longer than
// `abstract_budget` characters are cut at the last whitespace before the
// budget.
std::string build_prompt(const NodeText& text, const PromptTemplate& tmpl,
                         std::size_t abstract_budget = kDefaultAbstractBudget);

std::string truncate_at_whitespace(const std::string& text, std::size_t budget);

// cora, pubmed, ogbn-arxiv, and the three ogbn-arxiv prompt variants
// (ogbn-arxiv/title-first, ogbn-arxiv/focus-on-text, ogbn-arxiv/chain-of-thought).
const std::vector<PromptTemplate>& builtin_templates();

// Templates whose id is `family` or starts with `family/`.
std::vector<PromptTemplate> template_variants(const std::string& family);

// Looks up a builtin by id; throws ConfigError if absent.
const PromptTemplate& builtin_template(const std::string& template_id);

// {"template_id": ..., "question_text": ..., "expected_k": ..., "title_first"?: bool}
PromptTemplate load_template(const std::filesystem::path& path);
void save_template(const PromptTemplate& tmpl, const std::filesystem::path& path);

// Synthetic-dataset question listing every class name, asking for k of them.
PromptTemplate topic_template(const LabelSpace& labels, std::size_t k);

}  // namespace tape
