#include "tape/features.hpp"

#include <chrono>
#include <future>
#include <unordered_map>

#include "tape/error.hpp"
#include "tape/hash.hpp"
#include "tape/rng.hpp"

namespace tape {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Timed {
  DenseMatrix values;
  double seconds = 0.0;
};

Timed timed_interpreter(const std::vector<std::string>& texts, const TextAttributedGraph& graph,
                        const TfidfConfig& tfidf, const InterpreterConfig& interpreter) {
  const auto t0 = Clock::now();
  Timed t;
  t.values = interpreter_features(texts, graph, tfidf, interpreter);
  t.seconds = seconds_since(t0);
  return t;
}

}  // namespace

std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage) noexcept {
  return mix_key(seed, fnv1a64(stage));
}

std::string original_text(const NodeText& text) { return text.title + "\n" + text.abstract; }

std::vector<std::string> explanation_texts(const TextAttributedGraph& graph,
                                           const std::vector<EnrichmentRecord>& records) {
  std::unordered_map<std::string_view, const EnrichmentRecord*> by_id;
  for (const auto& r : records) by_id[r.node_id] = &r;
  std::vector<std::string> out(graph.num_nodes);
  for (std::size_t i = 0; i < graph.num_nodes; ++i) {
    const auto it = by_id.find(graph.texts[i].node_id);
    if (it != by_id.end()) out[i] = it->second->explanation;
  }
  return out;
}

DenseMatrix interpreter_features(const std::vector<std::string>& texts, const TextAttributedGraph& graph,
                                 const TfidfConfig& tfidf, const InterpreterConfig& interpreter) {
  if (texts.size() != graph.num_nodes) throw ShapeError("interpreter_features: one text per node required");
  if (graph.splits.train.empty()) throw ConfigError("interpreter_features: graph has no train split");
  const auto model = TfidfModel::fit(texts, tfidf);
  const auto x = model.encode_all(texts);
  const auto mlp = train_interpreter(x, graph.labels, graph.splits.train, graph.splits.val, interpreter);
  return extract_features(mlp, x);
}

BuiltFeatures build_features(const TextAttributedGraph& graph, const std::vector<EnrichmentRecord>& records,
                             const FeatureBuildConfig& config) {
  std::vector<std::string> orig(graph.num_nodes);
  for (std::size_t i = 0; i < graph.num_nodes; ++i) orig[i] = original_text(graph.texts[i]);
  const auto expl = explanation_texts(graph, records);

  auto tfidf_orig = config.tfidf, tfidf_expl = config.tfidf;
  tfidf_orig.seed = stage_seed(config.seed, "tfidf/orig");
  tfidf_expl.seed = stage_seed(config.seed, "tfidf/expl");
  auto mlp_orig = config.interpreter, mlp_expl = config.interpreter;
  mlp_orig.seed = stage_seed(config.seed, "interpreter/orig");
  mlp_expl.seed = stage_seed(config.seed, "interpreter/expl");

  Timed h_orig, h_expl;
  if (config.parallel) {
    auto job = std::async(std::launch::async, timed_interpreter, std::cref(expl), std::cref(graph),
                          std::cref(tfidf_expl), std::cref(mlp_expl));
    h_orig = timed_interpreter(orig, graph, tfidf_orig, mlp_orig);
    h_expl = job.get();
  } else {
    h_orig = timed_interpreter(orig, graph, tfidf_orig, mlp_orig);
    h_expl = timed_interpreter(expl, graph, tfidf_expl, mlp_expl);
  }

  const auto t0 = Clock::now();
  auto pred_cfg = config.pred;
  pred_cfg.num_classes = graph.num_classes();
  pred_cfg.seed = stage_seed(config.seed, "pred");
  std::vector<std::string> ids(graph.num_nodes);
  for (std::size_t i = 0; i < graph.num_nodes; ++i) ids[i] = graph.texts[i].node_id;

  BuiltFeatures out;
  out.features["pred"] = encode_predictions(records, ids, pred_cfg);
  out.timings["features_pred"] = seconds_since(t0);
  out.timings["features_orig"] = h_orig.seconds;
  out.timings["features_expl"] = h_expl.seconds;
  out.features["orig"] = std::move(h_orig.values);
  out.features["expl"] = std::move(h_expl.values);
  return out;
}

}  // namespace tape
