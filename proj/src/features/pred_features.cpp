#include "tape/pred_features.hpp"

#include <cmath>
#include <unordered_map>

#include "tape/error.hpp"
#include "tape/rng.hpp"

namespace tape {

namespace {
constexpr std::uint64_t kPredStream = 0x70726564;  // "pred"
}

void PredFeatureConfig::validate() const {
  if (k < 1) throw ConfigError("pred.k must be >= 1");
  if (num_classes < 2) throw ConfigError("pred.num_classes must be >= 2");
  if (k > num_classes) throw ConfigError("pred.k must not exceed the number of classes");
  if (d_p < 1) throw ConfigError("pred.d_p must be >= 1");
  if (projection == PredProjection::identity && d_p != one_hot_width())
    throw ConfigError("pred.d_p must equal k(C+1) = " + std::to_string(one_hot_width()) +
                      " for the identity projection");
}

std::vector<float> one_hot_concat(std::span<const std::size_t> ranked_padded,
                                  const PredFeatureConfig& config) {
  if (ranked_padded.size() != config.k)
    throw ConfigError("one_hot_concat: expected " + std::to_string(config.k) + " ranks, got " +
                      std::to_string(ranked_padded.size()));
  std::vector<float> out(config.one_hot_width(), 0.0f);
  for (std::size_t j = 0; j < config.k; ++j) {
    if (ranked_padded[j] > config.absent_index())
      throw ConfigError("one_hot_concat: class index " + std::to_string(ranked_padded[j]) + " out of range");
    out[j * (config.num_classes + 1) + ranked_padded[j]] = 1.0f;
  }
  return out;
}

DenseMatrix pred_projection(const PredFeatureConfig& config) {
  config.validate();
  const std::size_t width = config.one_hot_width();
  if (config.projection != PredProjection::gaussian) return DenseMatrix::identity(width);
  DenseMatrix p(config.d_p, width);
  const std::uint64_t key = mix_key(config.seed, kPredStream);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.d_p));
  for (std::size_t r = 0; r < config.d_p; ++r)
    for (std::size_t c = 0; c < width; ++c)
      p(r, c) = static_cast<float>(counter_normal(key, c * config.d_p + r) * scale);
  return p;
}

DenseMatrix encode_predictions(const std::vector<EnrichmentRecord>& records,
                               const std::vector<std::string>& node_ids,
                               const PredFeatureConfig& config) {
  config.validate();
  std::unordered_map<std::string, const EnrichmentRecord*> by_id;
  for (const auto& r : records) by_id.emplace(r.node_id, &r);
  const EnrichmentRecord missing;

  const DenseMatrix p = pred_projection(config);
  const bool project = config.projection == PredProjection::gaussian;
  DenseMatrix out(node_ids.size(), config.output_dim());
  std::vector<double> acc(config.d_p);
  for (std::size_t i = 0; i < node_ids.size(); ++i) {
    const auto it = by_id.find(node_ids[i]);
    const EnrichmentRecord& rec = it == by_id.end() ? missing : *it->second;
    for (const auto c : rec.ranked)
      if (c >= config.num_classes)
        throw ConfigError("record " + rec.node_id + ": class index " + std::to_string(c) + " out of range");
    const auto padded = pad_ranked(rec, config.k, config.absent_index());
    auto row = out.row(i);
    if (!project) {
      const auto hot = one_hot_concat(padded, config);
      std::copy(hot.begin(), hot.end(), row.begin());
      continue;
    }
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t j = 0; j < config.k; ++j) {
      const std::size_t col = j * (config.num_classes + 1) + padded[j];
      for (std::size_t r = 0; r < config.d_p; ++r) acc[r] += static_cast<double>(p(r, col));
    }
    for (std::size_t r = 0; r < config.d_p; ++r) row[r] = static_cast<float>(acc[r]);
  }
  return out;
}

}  // namespace tape
