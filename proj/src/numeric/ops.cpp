#include "tape/ops.hpp"

#include <string>

#include "tape/error.hpp"
#include "tape/kernels.hpp"

namespace tape {
namespace {

std::string shape(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

kernels::CsrView view(const SparseCsr& s) {
  return {s.row_offsets().data(), s.col_indices().data(), s.values().data(), s.rows()};
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: " + shape(a) + " * " + shape(b));
  DenseMatrix c(a.rows(), b.cols());
  kernels::active().gemm(a.data().data(), b.data().data(), c.data().data(), a.rows(), a.cols(),
                         b.cols());
  return c;
}

DenseMatrix spmm(const SparseCsr& s, const DenseMatrix& d) {
  if (s.cols() != d.rows()) {
    throw ShapeError("spmm: sparse " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                     " * " + shape(d));
  }
  DenseMatrix out(s.rows(), d.cols());
  kernels::active().spmm(view(s), d.data().data(), out.data().data(), d.cols());
  return out;
}

DenseMatrix spmm_transposed(const SparseCsr& s, const DenseMatrix& d) {
  if (s.rows() != d.rows()) {
    throw ShapeError("spmm_transposed: sparse " + std::to_string(s.rows()) + "x" +
                     std::to_string(s.cols()) + " ^T * " + shape(d));
  }
  DenseMatrix out(s.cols(), d.cols());
  kernels::active().spmm_t_acc(view(s), d.data().data(), out.data().data(), d.cols());
  return out;
}

}  // namespace tape
