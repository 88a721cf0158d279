#include "tape/nn.hpp"

#include <cmath>

#include "tape/error.hpp"
#include "tape/rng.hpp"

namespace tape {

DenseMatrix glorot_uniform(std::size_t rows, std::size_t cols, std::uint64_t key) {
  DenseMatrix m(rows, cols);
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  auto d = m.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = static_cast<float>((2.0 * counter_uniform(key, i) - 1.0) * a);
  return m;
}

std::size_t argmax_row(const DenseMatrix& m, std::size_t row) {
  const auto r = m.row(row);
  std::size_t best = 0;
  for (std::size_t c = 1; c < r.size(); ++c)
    if (r[c] > r[best]) best = c;
  return best;
}

double masked_accuracy(const DenseMatrix& logits, std::span<const int> labels,
                       std::span<const std::size_t> mask) {
  if (mask.empty()) throw ConfigError("accuracy over an empty mask");
  if (labels.size() != logits.rows()) throw ShapeError("accuracy: labels/logits row mismatch");
  std::size_t hits = 0;
  for (const auto i : mask) {
    if (i >= logits.rows()) throw ShapeError("accuracy: mask index out of range");
    hits += static_cast<int>(argmax_row(logits, i)) == labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(mask.size());
}

double masked_cross_entropy(const DenseMatrix& logits, std::span<const int> labels,
                            std::span<const std::size_t> mask) {
  if (mask.empty()) throw ConfigError("cross-entropy over an empty mask");
  double total = 0.0;
  for (const auto i : mask) {
    const auto r = logits.row(i);
    double mx = r[0];
    for (const float v : r) mx = std::max(mx, static_cast<double>(v));
    double z = 0.0;
    for (const float v : r) z += std::exp(static_cast<double>(v) - mx);
    total += mx + std::log(z) - static_cast<double>(r[static_cast<std::size_t>(labels[i])]);
  }
  return total / static_cast<double>(mask.size());
}

DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> rows) {
  DenseMatrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= m.rows()) throw ShapeError("gather_rows: index out of range");
    const auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

bool EarlyStopper::observe(std::size_t epoch, double score) {
  const bool better = !has_best_ || (higher_is_better_ ? score > best_score_ : score < best_score_);
  if (better) {
    has_best_ = true;
    best_epoch_ = epoch;
    best_score_ = score;
  }
  return better;
}

}  // namespace tape
