#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tape/gnn.hpp"
#include "tape/graph.hpp"
#include "tape/matrix.hpp"

namespace tape {

enum class EnsembleMode { logits, probabilities };

std::string_view to_string(EnsembleMode mode) noexcept;
EnsembleMode parse_ensemble_mode(std::string_view name);

// Elementwise mean of the matrices, or of their row softmaxes under
// EnsembleMode::probabilities. Throws ConfigError on an empty list and
// ShapeError on mismatched shapes.
DenseMatrix ensemble_mean(std::span<const DenseMatrix> logits,
                          EnsembleMode mode = EnsembleMode::logits);

// Argmax accuracy over `mask`; ties go to the lowest class index.
double accuracy(const DenseMatrix& logits, std::span<const int> labels,
                std::span<const std::size_t> mask);

// Mean and sample (n - 1) standard deviation; std is 0 for one value.
struct MeanStd {
  std::vector<double> values;
  double mean = 0.0;
  double std = 0.0;

  static MeanStd of(std::vector<double> values);
  friend bool operator==(const MeanStd&, const MeanStd&) = default;
};

struct SplitScores {
  MeanStd val;
  MeanStd test;
  friend bool operator==(const SplitScores&, const SplitScores&) = default;
};

inline constexpr const char* kSourceNames[] = {"orig", "expl", "pred"};

struct ExperimentReport {
  std::vector<std::string> sources;
  std::map<std::string, SplitScores> per_source;
  SplitScores ensemble;
  std::vector<std::uint64_t> seeds;
  std::string config_hash;
  GnnArch arch = GnnArch::gcn;
  EnsembleMode mode = EnsembleMode::logits;
  std::map<std::string, double> timings;  // seconds per stage

  friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

nlohmann::json to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

struct ExperimentSpec {
  GnnConfig gnn;  // gnn.seed is replaced by each entry of `seeds`
  std::vector<std::uint64_t> seeds{0};
  std::vector<std::string> sources{"orig", "expl", "pred"};
  EnsembleMode mode = EnsembleMode::logits;
  // Train the per-source GNNs of one seed on separate threads.
  bool parallel = false;
  std::string config_hash;
};

using FeatureSet = std::map<std::string, DenseMatrix>;

// Trains one GNN per listed source for every seed, evaluates each and their
// ensemble on val and test. Throws ConfigError naming a listed source that
// `features` lacks.
ExperimentReport run_tape_experiment(const TextAttributedGraph& graph, const FeatureSet& features,
                                     const ExperimentSpec& spec);

struct AblationRow {
  std::string name;  // "full" or "without <source>"
  ExperimentReport report;
  double delta_test = 0.0;  // ensemble test mean minus the full run's
};

// run_tape_experiment over spec.sources minus `leave_out`. Throws
// ConfigError if nothing remains.
ExperimentReport ablate(const TextAttributedGraph& graph, const FeatureSet& features,
                        const ExperimentSpec& spec, const std::set<std::string>& leave_out);

// The full run followed by one leave-one-out run per source.
std::vector<AblationRow> ablation_sweep(const TextAttributedGraph& graph, const FeatureSet& features,
                                        const ExperimentSpec& spec);

// Rows = (label, report); columns h_orig, h_expl, h_pred, h_TAPE with test
// mean +- std. Sources absent from a report print as "-".
std::string render_table(const std::vector<std::pair<std::string, ExperimentReport>>& rows);
std::string render_ablation(const std::vector<AblationRow>& rows);

}  // namespace tape
