#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tape/matrix.hpp"
#include "tape/response_parser.hpp"

namespace tape {

enum class PredProjection {
  gaussian,   // frozen seeded P, entries N(0, 1/d_P)
  identity,   // P = I; requires d_P = k(C+1)
  learnable,  // raw one-hot concat; the GNN's first layer does the encoding
};

struct PredFeatureConfig {
  std::size_t k = 3;
  std::size_t num_classes = 2;
  std::size_t d_p = 256;
  std::uint64_t seed = 0;
  PredProjection projection = PredProjection::gaussian;

  // Reserved slot for missing ranks; one-hots are C + 1 wide.
  std::size_t absent_index() const noexcept { return num_classes; }
  std::size_t one_hot_width() const noexcept { return k * (num_classes + 1); }
  std::size_t output_dim() const noexcept {
    return projection == PredProjection::gaussian ? d_p : one_hot_width();
  }
  // Throws ConfigError.
  void validate() const;
};

// Position j(C+1) + ranked[j] is 1 for each j. Throws ConfigError unless
// ranked has exactly k entries, each <= C.
std::vector<float> one_hot_concat(std::span<const std::size_t> ranked_padded,
                                  const PredFeatureConfig& config);

// d_P x k(C+1); identity for PredProjection::identity.
DenseMatrix pred_projection(const PredFeatureConfig& config);

// Row i encodes the record whose node_id is node_ids[i]; nodes without a
// record are encoded as k absent ranks.
DenseMatrix encode_predictions(const std::vector<EnrichmentRecord>& records,
                               const std::vector<std::string>& node_ids,
                               const PredFeatureConfig& config);

}  // namespace tape
