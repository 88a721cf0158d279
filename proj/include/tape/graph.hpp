#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tape/matrix.hpp"

namespace tape {

inline constexpr int kUnlabeled = -1;

struct NodeText {
  std::string node_id;
  std::string title;
  std::string abstract;

  friend bool operator==(const NodeText&, const NodeText&) = default;
};

struct LabelClass {
  std::string name;
  std::vector<std::string> match;  // lowercase match forms

  friend bool operator==(const LabelClass&, const LabelClass&) = default;
};

// Ordered class list. Index <-> name is a bijection; match forms are unique
// across classes.
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(std::vector<LabelClass> classes);

  // One class per name, matched by its lowercased name.
  static LabelSpace from_names(const std::vector<std::string>& names);

  std::size_t size() const noexcept { return classes_.size(); }
  const LabelClass& operator[](std::size_t i) const noexcept { return classes_[i]; }
  const std::vector<LabelClass>& classes() const noexcept { return classes_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  friend bool operator==(const LabelSpace&, const LabelSpace&) = default;

 private:
  std::vector<LabelClass> classes_;
};

LabelSpace cora_label_space();
LabelSpace pubmed_label_space();
LabelSpace arxiv_label_space();

struct SplitMask {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  bool empty() const noexcept { return train.empty() && val.empty() && test.empty(); }
  friend bool operator==(const SplitMask&, const SplitMask&) = default;
};

// Immutable after construction; safe to share across threads.
struct TextAttributedGraph {
  std::size_t num_nodes = 0;
  SparseCsr adjacency;  // symmetric, unit weights
  std::vector<NodeText> texts;
  std::vector<int> labels;  // class index or kUnlabeled
  LabelSpace label_space;
  SplitMask splits;

  std::size_t num_classes() const noexcept { return label_space.size(); }
  std::vector<std::size_t> labeled_nodes() const;

  // Throws ConfigError on any broken invariant.
  void validate() const;

  friend bool operator==(const TextAttributedGraph&, const TextAttributedGraph&) = default;
};

// Unit-weight symmetric CSR from an edge list, deduplicated. Self-loops kept.
SparseCsr symmetrize_edges(std::size_t num_nodes,
                           const std::vector<std::pair<std::size_t, std::size_t>>& edges);
// A + A^T pattern with unit weights. Idempotent.
SparseCsr symmetrize(const SparseCsr& a);

struct DatasetPaths {
  std::filesystem::path edges;
  std::filesystem::path texts;
  std::filesystem::path labels;
  std::optional<std::filesystem::path> splits;
  // When absent, the label space is the sorted set of label names.
  std::optional<std::filesystem::path> label_space;

  // Conventional file names inside a dataset directory.
  static DatasetPaths in_directory(const std::filesystem::path& dir);
};

TextAttributedGraph load_tag_dataset(const DatasetPaths& paths);
LabelSpace load_label_space(const std::filesystem::path& path);

// Writes the conventional file set plus manifest.json.
void save_tag_dataset(const TextAttributedGraph& g, const std::filesystem::path& dir);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

// Shuffles labeled nodes with `seed`; val/test get floor(n*ratio) nodes and
// train gets the rest. Each list is returned sorted.
SplitMask split_nodes(const TextAttributedGraph& g, SplitRatios ratios, std::uint64_t seed);

// Fraction of non-self-loop undirected edges whose endpoints share a label,
// over edges with both endpoints labeled.
double edge_homophily(const TextAttributedGraph& g);

struct SyntheticSpec {
  std::size_t num_nodes = 600;
  std::size_t num_classes = 4;
  double homophily = 0.8;
  std::size_t keywords_per_class = 12;
  std::uint64_t seed = 1;
  // Knobs below shape how informative the raw text is.
  std::size_t avg_degree = 4;
  std::size_t title_keywords = 3;
  std::size_t abstract_keywords = 6;
  std::size_t abstract_filler = 24;
  double keyword_noise = 0.7;  // chance a planted keyword comes from a random class
};

// Planted-partition text-attributed graph. Titles hold only planted
// keywords; abstracts mix keywords with shared filler vocabulary.
TextAttributedGraph make_synthetic_tag(const SyntheticSpec& spec);

}  // namespace tape
