#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tape/ensemble.hpp"
#include "tape/graph.hpp"
#include "tape/pred_features.hpp"
#include "tape/response_parser.hpp"
#include "tape/text_encoder.hpp"

namespace tape {

struct FeatureBuildConfig {
  TfidfConfig tfidf;               // seed is replaced by the stage seed
  InterpreterConfig interpreter;   // seed is replaced by the stage seed
  PredFeatureConfig pred;          // num_classes and seed are filled from the graph and stage seed
  std::uint64_t seed = 0;
  // Train the orig and expl interpreters on separate threads.
  bool parallel = false;
};

// Fixed per-stage seed: mix of the run seed and the stage name.
std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage) noexcept;

// "{title}\n{abstract}", the orig text of a node.
std::string original_text(const NodeText& text);

// Explanation text per node, in node order; nodes without a record get "".
std::vector<std::string> explanation_texts(const TextAttributedGraph& graph,
                                           const std::vector<EnrichmentRecord>& records);

// TF-IDF, then an interpreter MLP trained on the graph's train/val split,
// whose hidden layer is the feature.
DenseMatrix interpreter_features(const std::vector<std::string>& texts, const TextAttributedGraph& graph,
                                 const TfidfConfig& tfidf, const InterpreterConfig& interpreter);

struct BuiltFeatures {
  FeatureSet features;                 // "orig", "expl", "pred"
  std::map<std::string, double> timings;  // seconds per source
};

BuiltFeatures build_features(const TextAttributedGraph& graph, const std::vector<EnrichmentRecord>& records,
                             const FeatureBuildConfig& config);

}  // namespace tape
