#include "tape/autodiff.hpp"

#include <cmath>
#include <string>

#include "tape/error.hpp"
#include "tape/kernels.hpp"
#include "tape/rng.hpp"

namespace tape {
namespace {

std::string shape(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

kernels::CsrView view(const SparseCsr& s) {
  return {s.row_offsets().data(), s.col_indices().data(), s.values().data(), s.rows()};
}

}  // namespace

float dropout_scale(const DropoutKey& key, std::size_t index, float p) noexcept {
  const std::uint64_t k = mix_key(key.seed, key.epoch, key.op_id);
  return counter_uniform(k, index) < static_cast<double>(p) ? 0.0f : 1.0f / (1.0f - p);
}

GradTape::Node& GradTape::node(Var v) {
  if (v.id >= nodes_.size()) throw Error("GradTape: variable does not belong to this tape");
  return nodes_[v.id];
}

const GradTape::Node& GradTape::node(Var v) const {
  if (v.id >= nodes_.size()) throw Error("GradTape: variable does not belong to this tape");
  return nodes_[v.id];
}

Var GradTape::push(Node n, const char* op) {
  if (consumed_) throw Error("GradTape: cannot record after backward()");
  require_finite(n.value(), op);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

DenseMatrix& GradTape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value().empty()) n.grad = DenseMatrix(n.value().rows(), n.value().cols());
  return n.grad;
}

Var GradTape::constant(DenseMatrix value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n), "constant");
}

Var GradTape::constant_view(const DenseMatrix& value) {
  Node n;
  n.view = &value;
  return push(std::move(n), "constant");
}

Var GradTape::parameter(Parameter& p) {
  p.grad = DenseMatrix(p.value.rows(), p.value.cols());
  Node n;
  n.view = &p.value;
  n.param = &p;
  n.requires_grad = true;
  return push(std::move(n), p.name.empty() ? "parameter" : p.name.c_str());
}

Var GradTape::matmul(Var a, Var b) {
  const DenseMatrix& av = node(a).value();
  const DenseMatrix& bv = node(b).value();
  if (av.cols() != bv.rows()) throw ShapeError("matmul: " + shape(av) + " * " + shape(bv));
  Node n;
  n.owned = DenseMatrix(av.rows(), bv.cols());
  kernels::active().gemm(av.data().data(), bv.data().data(), n.owned.data().data(), av.rows(),
                         av.cols(), bv.cols());
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.backward = [a, b](GradTape& t, std::size_t self) {
    const auto& k = kernels::active();
    const DenseMatrix& g = t.nodes_[self].grad;
    const DenseMatrix& av = t.nodes_[a.id].value();
    const DenseMatrix& bv = t.nodes_[b.id].value();
    if (t.nodes_[a.id].requires_grad) {
      // dA = G * B^T
      const DenseMatrix bt = bv.transposed();
      DenseMatrix da(g.rows(), bv.rows());
      k.gemm(g.data().data(), bt.data().data(), da.data().data(), g.rows(), g.cols(), bt.cols());
      DenseMatrix& ga = t.grad_of(a.id);
      k.accumulate(da.data().data(), ga.data().data(), da.size());
    }
    if (t.nodes_[b.id].requires_grad) {
      // dB = A^T * G
      DenseMatrix& gb = t.grad_of(b.id);
      k.gemm_tn_acc(av.data().data(), g.data().data(), gb.data().data(), av.rows(), av.cols(),
                    g.cols());
    }
  };
  return push(std::move(n), "matmul");
}

Var GradTape::spmm(const SparseCsr& s, Var x) {
  const DenseMatrix& xv = node(x).value();
  if (s.cols() != xv.rows()) {
    throw ShapeError("spmm: sparse " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                     " * " + shape(xv));
  }
  Node n;
  n.owned = DenseMatrix(s.rows(), xv.cols());
  kernels::active().spmm(view(s), xv.data().data(), n.owned.data().data(), xv.cols());
  n.requires_grad = node(x).requires_grad;
  const SparseCsr* sp = &s;
  n.backward = [sp, x](GradTape& t, std::size_t self) {
    if (!t.nodes_[x.id].requires_grad) return;
    const DenseMatrix& g = t.nodes_[self].grad;
    DenseMatrix& gx = t.grad_of(x.id);
    kernels::active().spmm_t_acc(view(*sp), g.data().data(), gx.data().data(), g.cols());
  };
  return push(std::move(n), "spmm");
}

Var GradTape::add(Var a, Var b) {
  const DenseMatrix& av = node(a).value();
  const DenseMatrix& bv = node(b).value();
  if (!av.same_shape(bv)) throw ShapeError("add: " + shape(av) + " + " + shape(bv));
  Node n;
  n.owned = av;
  kernels::active().accumulate(bv.data().data(), n.owned.data().data(), bv.size());
  n.requires_grad = node(a).requires_grad || node(b).requires_grad;
  n.backward = [a, b](GradTape& t, std::size_t self) {
    const auto& k = kernels::active();
    const DenseMatrix& g = t.nodes_[self].grad;
    for (const Var in : {a, b}) {
      if (!t.nodes_[in.id].requires_grad) continue;
      k.accumulate(g.data().data(), t.grad_of(in.id).data().data(), g.size());
    }
  };
  return push(std::move(n), "add");
}

Var GradTape::add_bias(Var x, Var bias) {
  const DenseMatrix& xv = node(x).value();
  const DenseMatrix& bv = node(bias).value();
  if (bv.rows() != 1 || bv.cols() != xv.cols())
    throw ShapeError("add_bias: " + shape(xv) + " + bias " + shape(bv));
  Node n;
  n.owned = xv;
  const auto& k = kernels::active();
  for (std::size_t r = 0; r < xv.rows(); ++r)
    k.accumulate(bv.data().data(), n.owned.row(r).data(), bv.cols());
  n.requires_grad = node(x).requires_grad || node(bias).requires_grad;
  n.backward = [x, bias](GradTape& t, std::size_t self) {
    const DenseMatrix& g = t.nodes_[self].grad;
    if (t.nodes_[x.id].requires_grad)
      kernels::active().accumulate(g.data().data(), t.grad_of(x.id).data().data(), g.size());
    if (t.nodes_[bias.id].requires_grad) {
      std::vector<double> col(g.cols(), 0.0);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const auto row = g.row(r);
        for (std::size_t c = 0; c < g.cols(); ++c) col[c] += row[c];
      }
      DenseMatrix& gb = t.grad_of(bias.id);
      for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += static_cast<float>(col[c]);
    }
  };
  return push(std::move(n), "add_bias");
}

Var GradTape::relu(Var x) {
  const DenseMatrix& xv = node(x).value();
  Node n;
  n.owned = DenseMatrix(xv.rows(), xv.cols());
  kernels::active().relu(xv.data().data(), n.owned.data().data(), xv.size());
  n.requires_grad = node(x).requires_grad;
  n.backward = [x](GradTape& t, std::size_t self) {
    if (!t.nodes_[x.id].requires_grad) return;
    const DenseMatrix& g = t.nodes_[self].grad;
    kernels::active().relu_backward(t.nodes_[x.id].value().data().data(), g.data().data(),
                                    t.grad_of(x.id).data().data(), g.size());
  };
  return push(std::move(n), "relu");
}

Var GradTape::dropout(Var x, float p, DropoutKey key, bool train) {
  if (!(p >= 0.0f && p < 1.0f)) throw ConfigError("dropout: p must be in [0,1), got " + std::to_string(p));
  if (!train || p == 0.0f) return x;
  const DenseMatrix& xv = node(x).value();
  std::vector<float> scale(xv.size());
  for (std::size_t i = 0; i < scale.size(); ++i) scale[i] = dropout_scale(key, i, p);
  Node n;
  n.owned = DenseMatrix(xv.rows(), xv.cols());
  const auto in = xv.data();
  auto out = n.owned.data();
  for (std::size_t i = 0; i < scale.size(); ++i) out[i] = in[i] * scale[i];
  n.requires_grad = node(x).requires_grad;
  n.backward = [x, scale = std::move(scale)](GradTape& t, std::size_t self) {
    if (!t.nodes_[x.id].requires_grad) return;
    const auto g = t.nodes_[self].grad.data();
    auto gx = t.grad_of(x.id).data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * scale[i];
  };
  return push(std::move(n), "dropout");
}

Var GradTape::log_softmax(Var x) {
  const DenseMatrix& xv = node(x).value();
  Node n;
  n.owned = DenseMatrix(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const auto in = xv.row(r);
    auto out = n.owned.row(r);
    float mx = -std::numeric_limits<float>::infinity();
    for (const float v : in) mx = std::max(mx, v);
    double sum = 0.0;
    for (const float v : in) sum += std::exp(static_cast<double>(v) - mx);
    const double lse = static_cast<double>(mx) + std::log(sum);
    for (std::size_t c = 0; c < in.size(); ++c)
      out[c] = static_cast<float>(static_cast<double>(in[c]) - lse);
  }
  n.requires_grad = node(x).requires_grad;
  n.backward = [x](GradTape& t, std::size_t self) {
    if (!t.nodes_[x.id].requires_grad) return;
    const DenseMatrix& g = t.nodes_[self].grad;
    const DenseMatrix& y = t.nodes_[self].value();
    DenseMatrix& gx = t.grad_of(x.id);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const auto gr = g.row(r);
      const auto yr = y.row(r);
      auto out = gx.row(r);
      double gsum = 0.0;
      for (const float v : gr) gsum += v;
      for (std::size_t c = 0; c < gr.size(); ++c)
        out[c] += static_cast<float>(gr[c] - std::exp(static_cast<double>(yr[c])) * gsum);
    }
  };
  return push(std::move(n), "log_softmax");
}

Var GradTape::nll_loss(Var log_probs, std::span<const int> labels,
                       std::span<const std::size_t> mask) {
  const DenseMatrix& lp = node(log_probs).value();
  if (labels.size() != lp.rows())
    throw ShapeError("nll_loss: " + std::to_string(labels.size()) + " labels for " + shape(lp));
  if (mask.empty()) throw ConfigError("nll_loss: empty mask");
  double total = 0.0;
  for (const std::size_t i : mask) {
    if (i >= lp.rows()) throw ShapeError("nll_loss: mask index out of range");
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= lp.cols())
      throw ConfigError("nll_loss: node " + std::to_string(i) + " has no valid label");
    total -= lp(i, static_cast<std::size_t>(y));
  }
  Node n;
  n.owned = DenseMatrix(1, 1, static_cast<float>(total / static_cast<double>(mask.size())));
  n.requires_grad = node(log_probs).requires_grad;
  std::vector<std::size_t> rows(mask.begin(), mask.end());
  std::vector<int> ys;
  ys.reserve(rows.size());
  for (const std::size_t i : rows) ys.push_back(labels[i]);
  n.backward = [log_probs, rows = std::move(rows), ys = std::move(ys)](GradTape& t,
                                                                       std::size_t self) {
    if (!t.nodes_[log_probs.id].requires_grad) return;
    const float g = t.nodes_[self].grad(0, 0);
    const float w = g / static_cast<float>(rows.size());
    DenseMatrix& gl = t.grad_of(log_probs.id);
    for (std::size_t e = 0; e < rows.size(); ++e)
      gl(rows[e], static_cast<std::size_t>(ys[e])) -= w;
  };
  return push(std::move(n), "nll_loss");
}

Var GradTape::sum(Var x) {
  const DenseMatrix& xv = node(x).value();
  double total = 0.0;
  for (const float v : xv.data()) total += v;
  Node n;
  n.owned = DenseMatrix(1, 1, static_cast<float>(total));
  n.requires_grad = node(x).requires_grad;
  n.backward = [x](GradTape& t, std::size_t self) {
    if (!t.nodes_[x.id].requires_grad) return;
    const float g = t.nodes_[self].grad(0, 0);
    for (float& v : t.grad_of(x.id).data()) v += g;
  };
  return push(std::move(n), "sum");
}

const DenseMatrix& GradTape::value(Var v) const { return node(v).value(); }

const DenseMatrix& GradTape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) {
    // Lazily materialise a zero gradient for nodes the loss did not reach.
    auto& self = const_cast<GradTape&>(*this);
    return self.grad_of(v.id);
  }
  return n.grad;
}

void GradTape::backward(Var loss) {
  if (consumed_) throw Error("GradTape: backward() already ran on this tape; record a new forward pass");
  if (nodes_.empty() || !loss.valid() || loss.id >= nodes_.size())
    throw Error("GradTape: backward() called before a forward pass produced the loss");
  const DenseMatrix& lv = nodes_[loss.id].value();
  if (lv.rows() != 1 || lv.cols() != 1) throw ShapeError("backward: loss must be 1x1, got " + shape(lv));
  consumed_ = true;
  grad_of(loss.id)(0, 0) = 1.0f;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.requires_grad) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param != nullptr) {
      kernels::active().accumulate(n.grad.data().data(), n.param->grad.data().data(),
                                   n.grad.size());
    }
  }
}

}  // namespace tape
