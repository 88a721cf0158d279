#pragma once

#include "tape/matrix.hpp"

namespace tape {

// Plain (non-recording) matrix ops on top of the active kernel table.
// All throw ShapeError on mismatched operands.

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix spmm(const SparseCsr& s, const DenseMatrix& d);
// s^T * d without materialising the transpose.
DenseMatrix spmm_transposed(const SparseCsr& s, const DenseMatrix& d);

}  // namespace tape
