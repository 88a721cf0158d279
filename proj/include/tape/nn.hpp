#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tape/matrix.hpp"

namespace tape {

// U(-a, a) with a = sqrt(6 / (rows + cols)); entry (r, c) depends only on
// (key, r * cols + c).
DenseMatrix glorot_uniform(std::size_t rows, std::size_t cols, std::uint64_t key);

// Row argmax; ties go to the lowest column.
std::size_t argmax_row(const DenseMatrix& m, std::size_t row);

// Fraction of `mask` rows whose argmax equals the label. Throws ConfigError
// on an empty mask.
double masked_accuracy(const DenseMatrix& logits, std::span<const int> labels,
                       std::span<const std::size_t> mask);

// Mean cross-entropy of softmax(logits) over `mask`, accumulated in double.
double masked_cross_entropy(const DenseMatrix& logits, std::span<const int> labels,
                            std::span<const std::size_t> mask);

// Rows of `m` listed in `rows`, in that order.
DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> rows);

// Tracks the best epoch of a monitored score. After an epoch with no
// improvement, training stops once epoch - best_epoch > patience, so
// patience = 0 runs exactly one epoch past the best.
class EarlyStopper {
 public:
  EarlyStopper(std::size_t patience, bool higher_is_better)
      : patience_(patience), higher_is_better_(higher_is_better) {}

  // Returns true when `score` is a new best.
  bool observe(std::size_t epoch, double score);
  bool should_stop(std::size_t epoch) const noexcept {
    return has_best_ && epoch - best_epoch_ > patience_;
  }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_score() const noexcept { return best_score_; }

 private:
  std::size_t patience_;
  bool higher_is_better_;
  bool has_best_ = false;
  std::size_t best_epoch_ = 0;
  double best_score_ = 0.0;
};

}  // namespace tape
