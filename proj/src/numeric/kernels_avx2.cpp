// Compiled with -mavx2 (see CMakeLists.txt). Only reached after a CPUID check.
// No FMA: _mm256_mul_ps followed by _mm256_add_ps rounds exactly like the
// scalar reference.

#include <immintrin.h>

#include <cstring>

#include "tape/kernels.hpp"

namespace tape::kernels::avx2 {
namespace {

inline void axpy_row(float s, const float* x, float* y, std::size_t n) {
  const __m256 vs = _mm256_set1_ps(s);
  std::size_t j = 0;
  for (; j + 32 <= n; j += 32) {
    __m256 y0 = _mm256_loadu_ps(y + j);
    __m256 y1 = _mm256_loadu_ps(y + j + 8);
    __m256 y2 = _mm256_loadu_ps(y + j + 16);
    __m256 y3 = _mm256_loadu_ps(y + j + 24);
    y0 = _mm256_add_ps(y0, _mm256_mul_ps(vs, _mm256_loadu_ps(x + j)));
    y1 = _mm256_add_ps(y1, _mm256_mul_ps(vs, _mm256_loadu_ps(x + j + 8)));
    y2 = _mm256_add_ps(y2, _mm256_mul_ps(vs, _mm256_loadu_ps(x + j + 16)));
    y3 = _mm256_add_ps(y3, _mm256_mul_ps(vs, _mm256_loadu_ps(x + j + 24)));
    _mm256_storeu_ps(y + j, y0);
    _mm256_storeu_ps(y + j + 8, y1);
    _mm256_storeu_ps(y + j + 16, y2);
    _mm256_storeu_ps(y + j + 24, y3);
  }
  for (; j + 8 <= n; j += 8) {
    const __m256 yv = _mm256_add_ps(_mm256_loadu_ps(y + j), _mm256_mul_ps(vs, _mm256_loadu_ps(x + j)));
    _mm256_storeu_ps(y + j, yv);
  }
  for (; j < n; ++j) y[j] = y[j] + s * x[j];
}

void gemm(const float* a, const float* b, float* c, std::size_t n, std::size_t k, std::size_t m) {
  constexpr std::size_t kBlock = 64;
  for (std::size_t i = 0; i < n; ++i) {
    const float* ai = a + i * k;
    float* ci = c + i * m;
    std::size_t j0 = 0;
    // Eight accumulators live in registers across the whole k loop.
    for (; j0 + kBlock <= m; j0 += kBlock) {
      __m256 acc[8];
      for (auto& r : acc) r = _mm256_setzero_ps();
      for (std::size_t p = 0; p < k; ++p) {
        const float s = ai[p];
        if (s == 0.0f) continue;
        const __m256 vs = _mm256_set1_ps(s);
        const float* bp = b + p * m + j0;
        for (int r = 0; r < 8; ++r)
          acc[r] = _mm256_add_ps(acc[r], _mm256_mul_ps(vs, _mm256_loadu_ps(bp + 8 * r)));
      }
      for (int r = 0; r < 8; ++r) _mm256_storeu_ps(ci + j0 + 8 * r, acc[r]);
    }
    for (; j0 + 8 <= m; j0 += 8) {
      __m256 acc = _mm256_setzero_ps();
      for (std::size_t p = 0; p < k; ++p) {
        const float s = ai[p];
        if (s == 0.0f) continue;
        acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(s), _mm256_loadu_ps(b + p * m + j0)));
      }
      _mm256_storeu_ps(ci + j0, acc);
    }
    if (j0 < m) {
      std::memset(ci + j0, 0, (m - j0) * sizeof(float));
      for (std::size_t p = 0; p < k; ++p) {
        const float s = ai[p];
        if (s == 0.0f) continue;
        const float* bp = b + p * m;
        for (std::size_t j = j0; j < m; ++j) ci[j] = ci[j] + s * bp[j];
      }
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
      axpy_row(s, gr, c + p * m, m);
    }
  }
}

void spmm(CsrView s, const float* x, float* out, std::size_t m) {
  for (std::size_t r = 0; r < s.rows; ++r) {
    float* o = out + r * m;
    std::memset(o, 0, m * sizeof(float));
    for (std::size_t e = s.row_offsets[r]; e < s.row_offsets[r + 1]; ++e)
      axpy_row(s.values[e], x + static_cast<std::size_t>(s.col_indices[e]) * m, o, m);
  }
}

void spmm_t_acc(CsrView s, const float* g, float* out, std::size_t m) {
  for (std::size_t r = 0; r < s.rows; ++r) {
    const float* gr = g + r * m;
    for (std::size_t e = s.row_offsets[r]; e < s.row_offsets[r + 1]; ++e)
      axpy_row(s.values[e], gr, out + static_cast<std::size_t>(s.col_indices[e]) * m, m);
  }
}

void axpy(float alpha, const float* x, float* y, std::size_t n) { axpy_row(alpha, x, y, n); }

void accumulate(const float* x, float* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) y[i] = y[i] + x[i];
}

void relu(const float* x, float* out, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    // x > 0 ? x : 0, written as a mask so -0.0 and NaN behave like the scalar path.
    const __m256 mask = _mm256_cmp_ps(v, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(out + i, _mm256_and_ps(mask, v));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* x, const float* gy, float* gx, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m256 g = _mm256_loadu_ps(gx + i);
    const __m256 sum = _mm256_add_ps(g, _mm256_loadu_ps(gy + i));
    _mm256_storeu_ps(gx + i, _mm256_blendv_ps(g, sum, mask));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0f) gx[i] = gx[i] + gy[i];
}

void adam(float* w, const float* g, float* m, float* v, std::size_t n,
          const AdamCoefficients& k) {
  const __m256 b1 = _mm256_set1_ps(k.beta1);
  const __m256 b2 = _mm256_set1_ps(k.beta2);
  const __m256 c1 = _mm256_set1_ps(k.one_minus_beta1);
  const __m256 c2 = _mm256_set1_ps(k.one_minus_beta2);
  const __m256 bc1 = _mm256_set1_ps(k.inv_bias_correction1);
  const __m256 bc2 = _mm256_set1_ps(k.inv_bias_correction2);
  const __m256 lr = _mm256_set1_ps(k.learning_rate);
  const __m256 eps = _mm256_set1_ps(k.epsilon);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gi = _mm256_loadu_ps(g + i);
    const __m256 mi =
        _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(c1, gi));
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(c2, _mm256_mul_ps(gi, gi)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 m_hat = _mm256_mul_ps(mi, bc1);
    const __m256 v_hat = _mm256_mul_ps(vi, bc2);
    const __m256 step =
        _mm256_div_ps(_mm256_mul_ps(lr, m_hat), _mm256_add_ps(_mm256_sqrt_ps(v_hat), eps));
    _mm256_storeu_ps(w + i, _mm256_sub_ps(_mm256_loadu_ps(w + i), step));
  }
  if (i < n) scalar_table().adam(w + i, g + i, m + i, v + i, n - i, k);
}

}  // namespace

const KernelTable& table() noexcept {
  static const KernelTable t{"avx2", gemm,       gemm_tn_acc, spmm, spmm_t_acc,
                             axpy,   accumulate, relu,        relu_backward, adam};
  return t;
}

}  // namespace tape::kernels::avx2
