#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cdfgnn/error.hpp"

namespace cdfgnn {

/// Dense row-major matrix. Rows are per-vertex vectors throughout the project.
template <typename T>
class DenseMatrix {
 public:
  using value_type = T;

  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("DenseMatrix: value count does not equal rows*cols");
    }
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// Compressed sparse rows. Column indices inside each row are strictly
/// ascending, which fixes the accumulation order of spmm.
template <typename T>
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col_idx;
  std::vector<T> values;

  std::size_t nnz() const noexcept { return col_idx.size(); }

  std::span<const std::uint32_t> row_cols(std::size_t r) const {
    return {col_idx.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }
  std::span<const T> row_values(std::size_t r) const {
    return {values.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }

  DenseMatrix<T> to_dense() const;

  /// Throws IntegrityError if row_ptr/col_idx are inconsistent or unsorted.
  void validate() const;
};

/// Sparse-dense product, neighbors accumulated in ascending column order.
template <typename T>
DenseMatrix<T> spmm(const CsrMatrix<T>& adj, const DenseMatrix<T>& dense);

/// Plain i-k-j product; every output entry sums over k in ascending order.
template <typename T>
DenseMatrix<T> matmul(const DenseMatrix<T>& a, const DenseMatrix<T>& b);

/// aᵀ·b without materializing the transpose; sums over rows of a ascending.
template <typename T>
DenseMatrix<T> matmul_transpose_a(const DenseMatrix<T>& a, const DenseMatrix<T>& b);

/// a·bᵀ without materializing the transpose.
template <typename T>
DenseMatrix<T> matmul_transpose_b(const DenseMatrix<T>& a, const DenseMatrix<T>& b);

template <typename T>
DenseMatrix<T> transpose(const DenseMatrix<T>& m);

template <typename T>
DenseMatrix<T> add(const DenseMatrix<T>& a, const DenseMatrix<T>& b);

template <typename T>
DenseMatrix<T> sub(const DenseMatrix<T>& a, const DenseMatrix<T>& b);

template <typename T>
DenseMatrix<T> hadamard(const DenseMatrix<T>& a, const DenseMatrix<T>& b);

/// a += b in place.
template <typename T>
void add_inplace(DenseMatrix<T>& a, const DenseMatrix<T>& b);

/// Largest absolute element; 0 for an empty operand.
template <typename T>
T linf_norm(std::span<const T> values);

template <typename T>
T linf_norm(const DenseMatrix<T>& m) {
  return linf_norm<T>(m.values());
}

/// max |a_i - b_i| over equal-length spans.
template <typename T>
T linf_distance(std::span<const T> a, std::span<const T> b);

template <typename T>
DenseMatrix<T> relu(const DenseMatrix<T>& m);

/// Indicator x > 0. The subgradient at exactly 0 is 0.
template <typename T>
DenseMatrix<T> relu_grad(const DenseMatrix<T>& m);

/// Row-wise softmax with per-row max subtraction.
template <typename T>
DenseMatrix<T> softmax_rows(const DenseMatrix<T>& m);

/// Element type conversion (e.g. float64 features into a float32 run).
template <typename To, typename From>
DenseMatrix<To> cast_matrix(const DenseMatrix<From>& m) {
  DenseMatrix<To> out(m.rows(), m.cols());
  auto src = m.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<To>(src[i]);
  return out;
}

}  // namespace cdfgnn
