#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tape/autodiff.hpp"
#include "tape/llm_client.hpp"
#include "tape/matrix.hpp"

namespace tape {

struct TfidfConfig {
  std::size_t max_features = 20000;
  std::size_t min_df = 5;
  std::size_t min_token_length = 2;
  // Projection width d; 0 keeps the raw vocabulary-width vectors.
  std::size_t dim = 256;
  std::uint64_t seed = 0;
};

// Lowercased ASCII alphanumeric runs of at least `min_token_length` bytes.
// Any other byte separates tokens.
std::vector<std::string> tokenize(std::string_view text, std::size_t min_token_length);

class TfidfModel {
 public:
  // Keeps terms with df >= min_df; above max_features, the highest-df terms
  // win, ties by lexicographic order. Columns are in lexicographic order.
  // idf(t) = ln((1 + N) / (1 + df(t))) + 1. Throws ConfigError on an empty
  // corpus or vocabulary.
  static TfidfModel fit(const std::vector<std::string>& corpus, const TfidfConfig& config);

  // L2-normalized tf*idf weights as (column, weight) pairs in column order.
  // Out-of-vocabulary tokens are ignored; an all-OOV text gives no pairs.
  std::vector<std::pair<std::size_t, double>> weights(std::string_view text) const;

  // weights(text) times the projection (or the raw weights when dim == 0).
  std::vector<float> encode(std::string_view text) const;
  DenseMatrix encode_all(const std::vector<std::string>& texts) const;

  const std::map<std::string, std::size_t>& vocabulary() const noexcept { return vocabulary_; }
  const std::vector<double>& idf() const noexcept { return idf_; }
  // vocabulary size x d, entries N(0, 1/d); empty when dim == 0.
  const DenseMatrix& projection() const noexcept { return projection_; }
  std::size_t output_dim() const noexcept;
  const TfidfConfig& config() const noexcept { return config_; }

 private:
  TfidfConfig config_;
  std::map<std::string, std::size_t> vocabulary_;
  std::vector<double> idf_;
  DenseMatrix projection_;
};

struct InterpreterConfig {
  std::size_t hidden_dim = 256;
  float learning_rate = 1e-3f;
  std::size_t epochs = 500;
  std::size_t patience = 30;
  float dropout = 0.0f;
  std::uint64_t seed = 0;
};

// d -> d_h (relu) -> C. The relu output is the node feature.
struct InterpreterModel {
  Parameter w1, b1, w2, b2;

  std::size_t input_dim() const noexcept { return w1.value.rows(); }
  std::size_t hidden_dim() const noexcept { return w1.value.cols(); }
  std::size_t num_classes() const noexcept { return w2.value.cols(); }

  static InterpreterModel init(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                               std::uint64_t seed);
  DenseMatrix logits(const DenseMatrix& features) const;
};

struct InterpreterHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  std::size_t epochs_run() const noexcept { return train_loss.size(); }
};

// Full-batch Adam on mean cross-entropy over `train`; keeps the weights of
// the epoch with the lowest val cross-entropy. Throws NumericError naming
// the epoch and learning rate if the loss stops being finite.
InterpreterModel train_interpreter(const DenseMatrix& features, std::span<const int> labels,
                                   std::span<const std::size_t> train,
                                   std::span<const std::size_t> val,
                                   const InterpreterConfig& config,
                                   InterpreterHistory* history = nullptr);

// relu(x W1 + b1) for every row. Throws ShapeError on a width mismatch.
DenseMatrix extract_features(const InterpreterModel& model, const DenseMatrix& features);

struct EmbeddingConfig {
  std::string model_name = "text-embedding-3-small";
  std::size_t batch_size = 64;
};

// {"model", "input": [texts]} -> {"data": [{"embedding": [...]}, ...]},
// one row per text. Responses are cached per text under node id "embed".
DenseMatrix embed_remote(const std::vector<std::string>& texts, const EmbeddingConfig& embedding,
                         const LlmConfig& retry, Transport& transport, ResponseCache& cache);

}  // namespace tape
