#pragma once

// Data-parallel inner loops of the numeric core.
//
// Each kernel has a scalar reference version and, on x86-64, an AVX2 version
// chosen at startup from CPUID. Every kernel is written as a sequence of
// row axpys (no horizontal reductions) and without fused multiply-add, so
// each output element sees the same additions in the same order in both
// variants. The two tables therefore agree bit for bit, which the kernel
// equivalence tests check.

#include <cstddef>
#include <cstdint>
#include <span>

namespace tape::kernels {

struct AdamCoefficients {
  float beta1;
  float beta2;
  float one_minus_beta1;
  float one_minus_beta2;
  float inv_bias_correction1;  // 1 / (1 - beta1^t)
  float inv_bias_correction2;  // 1 / (1 - beta2^t)
  float learning_rate;
  float epsilon;
};

struct CsrView {
  const std::size_t* row_offsets;
  const std::uint32_t* col_indices;
  const float* values;
  std::size_t rows;
};

struct KernelTable {
  const char* name;

  // c[n x m] = a[n x k] * b[k x m]
  void (*gemm)(const float* a, const float* b, float* c, std::size_t n, std::size_t k,
               std::size_t m);
  // c[k x m] += a[n x k]^T * g[n x m]
  void (*gemm_tn_acc)(const float* a, const float* g, float* c, std::size_t n, std::size_t k,
                      std::size_t m);
  // out[rows x m] = s * x
  void (*spmm)(CsrView s, const float* x, float* out, std::size_t m);
  // out[cols(s) x m] += s^T * g
  void (*spmm_t_acc)(CsrView s, const float* g, float* out, std::size_t m);

  // y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  // y += x
  void (*accumulate)(const float* x, float* y, std::size_t n);
  // out = max(x, 0)
  void (*relu)(const float* x, float* out, std::size_t n);
  // gx += gy where x > 0
  void (*relu_backward)(const float* x, const float* gy, float* gx, std::size_t n);
  // In-place Adam update of w with moments m, v.
  void (*adam)(float* w, const float* g, float* m, float* v, std::size_t n,
               const AdamCoefficients& coef);
};

const KernelTable& scalar_table() noexcept;

// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_table() noexcept;

// Table used by the library. Chosen once: AVX2 when available, unless the
// environment variable TAPE_KERNELS is set to "scalar".
const KernelTable& active() noexcept;

}  // namespace tape::kernels
