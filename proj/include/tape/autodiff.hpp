#pragma once

// Reverse-mode differentiation for the fixed set of ops the models need.
//
// A GradTape records one forward pass. Nodes are appended in evaluation
// order, which is already a topological order, so backward() is a single
// reverse sweep. A tape supports exactly one backward pass; build a new
// tape for the next forward.

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tape/matrix.hpp"

namespace tape {

// Trainable tensor. grad is overwritten by every backward pass that uses it.
struct Parameter {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;

  Parameter() = default;
  Parameter(std::string n, DenseMatrix v)
      : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}
};

struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;
  bool valid() const noexcept { return id != kInvalid; }
};

// Dropout masks are a pure function of (seed, epoch, op_id, element index).
struct DropoutKey {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::uint64_t op_id = 0;
};

// Scale factor (0 or 1/(1-p)) for one element. Exposed so reference
// implementations can rebuild the exact mask.
float dropout_scale(const DropoutKey& key, std::size_t index, float p) noexcept;

class GradTape {
 public:
  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  Var constant(DenseMatrix value);
  // Caller keeps `value` alive for the tape's lifetime.
  Var constant_view(const DenseMatrix& value);
  Var parameter(Parameter& p);

  Var matmul(Var a, Var b);
  // `s` must outlive the tape. Differentiable w.r.t. x only.
  Var spmm(const SparseCsr& s, Var x);
  Var add(Var a, Var b);
  // bias is 1 x cols(x), broadcast over rows.
  Var add_bias(Var x, Var bias);
  Var relu(Var x);
  // Scales kept entries by 1/(1-p) when train is set; identity otherwise.
  Var dropout(Var x, float p, DropoutKey key, bool train);
  Var log_softmax(Var x);
  // Mean of -log_probs[i, labels[i]] over i in mask. Returns 1x1.
  Var nll_loss(Var log_probs, std::span<const int> labels, std::span<const std::size_t> mask);
  // Sum of all entries. Returns 1x1.
  Var sum(Var x);

  const DenseMatrix& value(Var v) const;
  // Gradient of the loss w.r.t. v; valid after backward(). Zero matrix if
  // the loss does not depend on v.
  const DenseMatrix& grad(Var v) const;

  // Accumulates d(loss)/d(param) into every registered Parameter::grad.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    DenseMatrix owned;
    const DenseMatrix* view = nullptr;
    DenseMatrix grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::function<void(GradTape&, std::size_t)> backward;

    const DenseMatrix& value() const noexcept { return view != nullptr ? *view : owned; }
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(Node n, const char* op);
  DenseMatrix& grad_of(std::size_t id);

  std::deque<Node> nodes_;  // deque: value() references stay valid while recording
  bool consumed_ = false;
};

}  // namespace tape
