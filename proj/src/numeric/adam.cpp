#include "tape/adam.hpp"

#include <cmath>

#include "tape/error.hpp"
#include "tape/kernels.hpp"

namespace tape {

Adam::Adam(std::span<Parameter* const> params, AdamConfig config)
    : params_(params.begin(), params.end()), config_(config) {
  if (!(config_.learning_rate > 0.0f)) throw ConfigError("Adam: learning rate must be positive");
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.rows(), p->value.cols());
    v_.emplace_back(p->value.rows(), p->value.cols());
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(config_.beta1), static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(config_.beta2), static_cast<double>(t_));
  const kernels::AdamCoefficients coef{
      config_.beta1,
      config_.beta2,
      1.0f - config_.beta1,
      1.0f - config_.beta2,
      static_cast<float>(1.0 / bc1),
      static_cast<float>(1.0 / bc2),
      config_.learning_rate,
      config_.epsilon,
  };
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (!p.grad.same_shape(p.value)) throw ShapeError("Adam: gradient shape mismatch for " + p.name);
    k.adam(p.value.data().data(), p.grad.data().data(), m_[i].data().data(), v_[i].data().data(),
           p.value.size(), coef);
  }
}

}  // namespace tape
