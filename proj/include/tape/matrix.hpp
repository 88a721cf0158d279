#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tape {

// Row-major float matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix from_rows(const std::vector<std::vector<float>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  std::vector<float>& storage() noexcept { return data_; }

  bool same_shape(const DenseMatrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const noexcept;
  void fill(float value) noexcept;

  DenseMatrix transposed() const;

  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// Throws NumericError naming `what` if any entry is NaN/Inf.
void require_finite(const DenseMatrix& m, const std::string& what);

struct Triplet {
  std::size_t row;
  std::size_t col;
  float value;
};

// Compressed sparse rows. Column indices are strictly increasing inside a row.
class SparseCsr {
 public:
  SparseCsr() = default;
  SparseCsr(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
            std::vector<std::uint32_t> col_indices, std::vector<float> values);

  // Duplicate coordinates are summed.
  static SparseCsr from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
  static SparseCsr identity(std::size_t n);
  static SparseCsr from_dense(const DenseMatrix& dense);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return col_indices_.size(); }

  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const std::uint32_t> col_indices() const noexcept { return col_indices_; }
  std::span<const float> values() const noexcept { return values_; }

  std::span<const std::uint32_t> row_indices(std::size_t r) const noexcept {
    return {col_indices_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
  }
  std::span<const float> row_values(std::size_t r) const noexcept {
    return {values_.data() + row_offsets_[r], row_offsets_[r + 1] - row_offsets_[r]};
  }

  bool contains(std::size_t r, std::size_t c) const noexcept;
  float at(std::size_t r, std::size_t c) const noexcept;
  bool is_symmetric_pattern() const noexcept;

  DenseMatrix to_dense() const;
  SparseCsr transposed() const;

  // Throws ConfigError describing the first broken structural invariant.
  void validate() const;

  friend bool operator==(const SparseCsr& a, const SparseCsr& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::uint32_t> col_indices_;
  std::vector<float> values_;
};

}  // namespace tape
