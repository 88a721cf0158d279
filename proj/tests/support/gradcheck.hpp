#pragma once

// Compares tape gradients against central finite differences of an
// independent double-precision reference of the same function.

#include <algorithm>
#include <functional>
#include <vector>

#include "reference.hpp"
#include "tape/autodiff.hpp"

namespace ref {

using TapeBuilder = std::function<tape::Var(tape::GradTape&, const std::vector<tape::Var>&)>;
using RefBuilder = std::function<Mat(const std::vector<Mat>&)>;

// Non-scalar outputs are reduced with fixed random weights,
// loss = sum(L * out * R), so every output entry gets a distinct weight
// along rows and columns.
inline double grad_check(const std::vector<tape::DenseMatrix>& inits, const TapeBuilder& build,
                         const RefBuilder& reference, std::uint64_t seed, double h = 1e-4) {
  std::vector<tape::Parameter> params;
  params.reserve(inits.size());
  for (std::size_t i = 0; i < inits.size(); ++i) params.emplace_back("p" + std::to_string(i), inits[i]);

  tape::Rng rng(seed);
  tape::GradTape tape;
  std::vector<tape::Var> vars;
  for (auto& p : params) vars.push_back(tape.parameter(p));
  tape::Var out = build(tape, vars);
  const tape::DenseMatrix& ov = tape.value(out);
  const bool scalar = ov.rows() == 1 && ov.cols() == 1;
  tape::DenseMatrix left, right;
  if (!scalar) {
    left = random_dense(1, ov.rows(), rng);
    right = random_dense(ov.cols(), 1, rng);
    out = tape.sum(tape.matmul(tape.matmul(tape.constant(left), out), tape.constant(right)));
  }
  tape.backward(out);

  std::vector<Mat> ref_params;
  for (const auto& p : params) ref_params.push_back(from(p.value));
  const Mat l = scalar ? Mat() : from(left);
  const Mat r = scalar ? Mat() : from(right);
  const auto f = [&]() {
    const Mat o = reference(ref_params);
    if (scalar) return o(0, 0);
    return matmul(matmul(l, o), r)(0, 0);
  };
  const auto numeric = finite_differences(ref_params, f, h);
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i)
    worst = std::max(worst, relative_error(params[i].grad, numeric[i]));
  return worst;
}

}  // namespace ref
