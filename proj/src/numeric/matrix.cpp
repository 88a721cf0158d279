#include "tape/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "tape/error.hpp"

namespace tape {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("DenseMatrix: data length " + std::to_string(data_.size()) +
                     " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
  return m;
}

DenseMatrix DenseMatrix::from_rows(const std::vector<std::vector<float>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  DenseMatrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw ShapeError("DenseMatrix::from_rows: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

void DenseMatrix::fill(float value) noexcept { std::fill(data_.begin(), data_.end(), value); }

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

void require_finite(const DenseMatrix& m, const std::string& what) {
  const auto data = m.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw NumericError(what + ": non-finite value at (" + std::to_string(i / m.cols()) + "," +
                         std::to_string(i % m.cols()) + ")");
    }
  }
}

SparseCsr::SparseCsr(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
                     std::vector<std::uint32_t> col_indices, std::vector<float> values)
    : rows_(rows),
      cols_(cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  validate();
}

SparseCsr SparseCsr::from_triplets(std::size_t rows, std::size_t cols,
                                   std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> offsets(rows + 1, 0);
  std::vector<std::uint32_t> cols_out;
  std::vector<float> vals;
  cols_out.reserve(triplets.size());
  vals.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const Triplet& t = triplets[i];
    if (t.row >= rows || t.col >= cols) {
      throw ShapeError("SparseCsr::from_triplets: entry (" + std::to_string(t.row) + "," +
                       std::to_string(t.col) + ") out of bounds");
    }
    if (i > 0 && triplets[i - 1].row == t.row && triplets[i - 1].col == t.col) {
      vals.back() += t.value;
      continue;
    }
    cols_out.push_back(static_cast<std::uint32_t>(t.col));
    vals.push_back(t.value);
    ++offsets[t.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) offsets[r + 1] += offsets[r];
  return SparseCsr(rows, cols, std::move(offsets), std::move(cols_out), std::move(vals));
}

SparseCsr SparseCsr::identity(std::size_t n) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.0f});
  return from_triplets(n, n, std::move(t));
}

SparseCsr SparseCsr::from_dense(const DenseMatrix& dense) {
  std::vector<Triplet> t;
  for (std::size_t r = 0; r < dense.rows(); ++r)
    for (std::size_t c = 0; c < dense.cols(); ++c)
      if (dense(r, c) != 0.0f) t.push_back({r, c, dense(r, c)});
  return from_triplets(dense.rows(), dense.cols(), std::move(t));
}

bool SparseCsr::contains(std::size_t r, std::size_t c) const noexcept {
  const auto idx = row_indices(r);
  return std::binary_search(idx.begin(), idx.end(), static_cast<std::uint32_t>(c));
}

float SparseCsr::at(std::size_t r, std::size_t c) const noexcept {
  const auto idx = row_indices(r);
  const auto it = std::lower_bound(idx.begin(), idx.end(), static_cast<std::uint32_t>(c));
  if (it == idx.end() || *it != c) return 0.0f;
  return row_values(r)[static_cast<std::size_t>(it - idx.begin())];
}

bool SparseCsr::is_symmetric_pattern() const noexcept {
  if (rows_ != cols_) return false;
  for (std::size_t r = 0; r < rows_; ++r)
    for (const auto c : row_indices(r))
      if (!contains(c, r)) return false;
  return true;
}

DenseMatrix SparseCsr::to_dense() const {
  DenseMatrix d(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    const auto idx = row_indices(r);
    const auto val = row_values(r);
    for (std::size_t e = 0; e < idx.size(); ++e) d(r, idx[e]) = val[e];
  }
  return d;
}

SparseCsr SparseCsr::transposed() const {
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (std::size_t r = 0; r < rows_; ++r) {
    const auto idx = row_indices(r);
    const auto val = row_values(r);
    for (std::size_t e = 0; e < idx.size(); ++e) t.push_back({idx[e], r, val[e]});
  }
  return from_triplets(cols_, rows_, std::move(t));
}

void SparseCsr::validate() const {
  if (row_offsets_.size() != rows_ + 1) throw ConfigError("SparseCsr: row_offsets size != rows+1");
  if (row_offsets_.front() != 0) throw ConfigError("SparseCsr: first offset != 0");
  if (row_offsets_.back() != col_indices_.size())
    throw ConfigError("SparseCsr: final offset != nnz");
  if (values_.size() != col_indices_.size())
    throw ConfigError("SparseCsr: values/col_indices length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_offsets_[r + 1] < row_offsets_[r])
      throw ConfigError("SparseCsr: row offsets decrease at row " + std::to_string(r));
    for (std::size_t e = row_offsets_[r]; e < row_offsets_[r + 1]; ++e) {
      if (col_indices_[e] >= cols_)
        throw ConfigError("SparseCsr: column index out of bounds in row " + std::to_string(r));
      if (e > row_offsets_[r] && col_indices_[e] <= col_indices_[e - 1])
        throw ConfigError("SparseCsr: columns not strictly increasing in row " + std::to_string(r));
    }
  }
}

}  // namespace tape
