#include <cmath>
#include <cstring>

#include "tape/kernels.hpp"

namespace tape::kernels {
namespace {

void gemm(const float* a, const float* b, float* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    float* ci = c + i * m;
    std::memset(ci, 0, m * sizeof(float));
    const float* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const float s = ai[p];
      if (s == 0.0f) continue;
      const float* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] = ci[j] + s * bp[j];
    }
  }
}

void gemm_tn_acc(const float* a, const float* g, float* c, std::size_t n, std::size_t k,
                 std::size_t m) {
  for (std::size_t r = 0; r < n; ++r) {
    const float* ar = a + r * k;
    const float* gr = g + r * m;
    for (std::size_t p = 0; p < k; ++p) {
      const float s = ar[p];
      if (s == 0.0f) continue;
      float* cp = c + p * m;
      for (std::size_t j = 0; j < m; ++j) cp[j] = cp[j] + s * gr[j];
    }
  }
}

void spmm(CsrView s, const float* x, float* out, std::size_t m) {
  for (std::size_t r = 0; r < s.rows; ++r) {
    float* o = out + r * m;
    std::memset(o, 0, m * sizeof(float));
    for (std::size_t e = s.row_offsets[r]; e < s.row_offsets[r + 1]; ++e) {
      const float v = s.values[e];
      const float* xr = x + static_cast<std::size_t>(s.col_indices[e]) * m;
      for (std::size_t j = 0; j < m; ++j) o[j] = o[j] + v * xr[j];
    }
  }
}

void spmm_t_acc(CsrView s, const float* g, float* out, std::size_t m) {
  for (std::size_t r = 0; r < s.rows; ++r) {
    const float* gr = g + r * m;
    for (std::size_t e = s.row_offsets[r]; e < s.row_offsets[r + 1]; ++e) {
      const float v = s.values[e];
      float* o = out + static_cast<std::size_t>(s.col_indices[e]) * m;
      for (std::size_t j = 0; j < m; ++j) o[j] = o[j] + v * gr[j];
    }
  }
}

void axpy(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void accumulate(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + x[i];
}

void relu(const float* x, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* x, const float* gy, float* gx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > 0.0f) gx[i] = gx[i] + gy[i];
}

void adam(float* w, const float* g, float* m, float* v, std::size_t n,
          const AdamCoefficients& k) {
  for (std::size_t i = 0; i < n; ++i) {
    const float gi = g[i];
    const float mi = k.beta1 * m[i] + k.one_minus_beta1 * gi;
    const float vi = k.beta2 * v[i] + k.one_minus_beta2 * (gi * gi);
    m[i] = mi;
    v[i] = vi;
    const float m_hat = mi * k.inv_bias_correction1;
    const float v_hat = vi * k.inv_bias_correction2;
    const float step = (k.learning_rate * m_hat) / (std::sqrt(v_hat) + k.epsilon);
    w[i] = w[i] - step;
  }
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{"scalar",  gemm,       gemm_tn_acc, spmm, spmm_t_acc,
                                 axpy,      accumulate, relu,        relu_backward, adam};
  return table;
}

}  // namespace tape::kernels
