#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tape/autodiff.hpp"
#include "tape/graph.hpp"
#include "tape/matrix.hpp"

namespace tape {

enum class GnnArch { gcn, sage };

std::string_view to_string(GnnArch arch) noexcept;
// Throws ConfigError for anything but "gcn" or "sage".
GnnArch parse_arch(std::string_view name);

struct GnnConfig {
  GnnArch arch = GnnArch::gcn;
  std::size_t num_layers = 3;
  std::size_t hidden_dim = 256;
  float dropout = 0.5f;
  float learning_rate = 0.01f;
  std::size_t max_epochs = 1000;
  std::size_t patience = 50;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  friend bool operator==(const GnnConfig&, const GnnConfig&) = default;
};

// gcn:  D^-1/2 (A + I) D^-1/2, D the degree of A + I.
// sage: A with each nonzero row scaled to sum 1; isolated rows stay empty.
// The pattern of `a` is used; its values are ignored.
SparseCsr normalize_adjacency(const SparseCsr& a, GnnArch arch);

// gcn layers have `weight` only. sage layers use `weight` on the self path,
// `neighbor_weight` on the aggregated path, and `bias` on the self path.
struct GnnLayer {
  Parameter weight;
  Parameter neighbor_weight;
  Parameter bias;
};

class GnnModel {
 public:
  // Glorot-initialised from config.seed.
  GnnModel(const GnnConfig& config, std::size_t input_dim, std::size_t num_classes);

  const GnnConfig& config() const noexcept { return config_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::vector<GnnLayer>& layers() noexcept { return layers_; }
  const std::vector<GnnLayer>& layers() const noexcept { return layers_; }
  std::vector<Parameter*> parameters();

  // Records one forward pass. `norm_adj` comes from normalize_adjacency with
  // the model's arch and must outlive the tape. Dropout hits every layer's
  // input when `train` is set; the last layer has no relu.
  Var forward(GradTape& tape, const SparseCsr& norm_adj, const DenseMatrix& features, bool train,
              std::size_t epoch);

 private:
  GnnConfig config_;
  std::size_t input_dim_;
  std::size_t num_classes_;
  std::vector<GnnLayer> layers_;
};

// Eval-mode logits for every node.
DenseMatrix predict(GnnModel& model, const SparseCsr& norm_adj, const DenseMatrix& features);

struct GnnEpoch {
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct GnnHistory {
  std::vector<GnnEpoch> epochs;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;

  friend bool operator==(const GnnHistory& a, const GnnHistory& b) {
    if (a.epochs.size() != b.epochs.size() || a.best_epoch != b.best_epoch ||
        a.best_val_accuracy != b.best_val_accuracy)
      return false;
    for (std::size_t i = 0; i < a.epochs.size(); ++i)
      if (a.epochs[i].train_loss != b.epochs[i].train_loss || a.epochs[i].val_accuracy != b.epochs[i].val_accuracy)
        return false;
    return true;
  }
};

struct TrainedGnn {
  GnnModel model;
  GnnHistory history;
};

// Full-batch Adam on the train-mask cross-entropy. Tracks val accuracy each
// epoch and returns the best-val weights. Throws NumericError naming the
// epoch and learning rate on a non-finite loss.
TrainedGnn train_gnn(const DenseMatrix& features, const TextAttributedGraph& graph,
                     const GnnConfig& config);

// Binary: magic "TAPEGNN1", u32 arch, u64 layers, u64 input dim, u64 hidden
// dim, u64 classes, then per layer each present parameter as u64 rows,
// u64 cols, float32 values. JSON sidecar `<path>.json`: config and metrics.
void save_checkpoint(const GnnModel& model, const std::filesystem::path& path,
                     const nlohmann::json& metrics = nlohmann::json::object());
GnnModel load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const GnnConfig& config);
GnnConfig gnn_config_from_json(const nlohmann::json& j);

}  // namespace tape
