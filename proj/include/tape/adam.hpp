#pragma once

#include <span>
#include <vector>

#include "tape/autodiff.hpp"

namespace tape {

struct AdamConfig {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

// Bias-corrected Adam over a fixed parameter list. The moment buffers are
// bound to parameter order, so always pass the same list.
class Adam {
 public:
  Adam(std::span<Parameter* const> params, AdamConfig config);

  void step();
  long long steps_taken() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<DenseMatrix> m_;
  std::vector<DenseMatrix> v_;
  AdamConfig config_;
  long long t_ = 0;
};

}  // namespace tape
