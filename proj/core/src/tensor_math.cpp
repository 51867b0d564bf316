#include "cdfgnn/tensor_math.hpp"

#include <cmath>
#include <string>

namespace cdfgnn {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename T>
void require_same_shape(const DenseMatrix<T>& a, const DenseMatrix<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.rows(), a.cols()) +
                     " vs " + shape_str(b.rows(), b.cols()));
  }
}

}  // namespace

template <typename T>
DenseMatrix<T> CsrMatrix<T>::to_dense() const {
  DenseMatrix<T> out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) out(r, col_idx[k]) += values[k];
  }
  return out;
}

template <typename T>
void CsrMatrix<T>::validate() const {
  if (row_ptr.size() != rows + 1 || row_ptr.front() != 0 || row_ptr.back() != col_idx.size() ||
      values.size() != col_idx.size()) {
    throw IntegrityError("CsrMatrix: inconsistent row pointers");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (row_ptr[r] > row_ptr[r + 1]) throw IntegrityError("CsrMatrix: decreasing row pointers");
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      if (col_idx[k] >= cols) throw IntegrityError("CsrMatrix: column index out of range");
      if (k > row_ptr[r] && col_idx[k] <= col_idx[k - 1]) {
        throw IntegrityError("CsrMatrix: row columns not strictly ascending");
      }
    }
  }
}

template <typename T>
DenseMatrix<T> spmm(const CsrMatrix<T>& adj, const DenseMatrix<T>& dense) {
  if (adj.cols != dense.rows()) {
    throw ShapeError("spmm: adjacency has " + std::to_string(adj.cols) + " columns, dense has " +
                     std::to_string(dense.rows()) + " rows");
  }
  const std::size_t width = dense.cols();
  DenseMatrix<T> out(adj.rows, width);
  for (std::size_t r = 0; r < adj.rows; ++r) {
    auto dst = out.row(r);
    for (std::size_t k = adj.row_ptr[r]; k < adj.row_ptr[r + 1]; ++k) {
      const T w = adj.values[k];
      auto src = dense.row(adj.col_idx[k]);
      for (std::size_t c = 0; c < width; ++c) dst[c] += w * src[c];
    }
  }
  return out;
}

template <typename T>
DenseMatrix<T> matmul(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.rows(), a.cols()) + " * " +
                     shape_str(b.rows(), b.cols()));
  }
  DenseMatrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * brow[j];
    }
  }
  return out;
}

template <typename T>
DenseMatrix<T> matmul_transpose_a(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_transpose_a: " + shape_str(a.rows(), a.cols()) + "^T * " +
                     shape_str(b.rows(), b.cols()));
  }
  DenseMatrix<T> out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T aki = arow[i];
      auto dst = out.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aki * brow[j];
    }
  }
  return out;
}

template <typename T>
DenseMatrix<T> matmul_transpose_b(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_transpose_b: " + shape_str(a.rows(), a.cols()) + " * " +
                     shape_str(b.rows(), b.cols()) + "^T");
  }
  DenseMatrix<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      T acc{0};
      for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      out(i, j) = acc;
    }
  }
  return out;
}

template <typename T>
DenseMatrix<T> transpose(const DenseMatrix<T>& m) {
  DenseMatrix<T> out(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(c, r) = m(r, c);
  }
  return out;
}

template <typename T>
DenseMatrix<T> add(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  require_same_shape(a, b, "add");
  DenseMatrix<T> out = a;
  add_inplace(out, b);
  return out;
}

template <typename T>
void add_inplace(DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  require_same_shape(a, b, "add_inplace");
  auto dst = a.values();
  auto src = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
DenseMatrix<T> sub(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  require_same_shape(a, b, "sub");
  DenseMatrix<T> out = a;
  auto dst = out.values();
  auto src = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
  return out;
}

template <typename T>
DenseMatrix<T> hadamard(const DenseMatrix<T>& a, const DenseMatrix<T>& b) {
  require_same_shape(a, b, "hadamard");
  DenseMatrix<T> out = a;
  auto dst = out.values();
  auto src = b.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= src[i];
  return out;
}

template <typename T>
T linf_norm(std::span<const T> values) {
  T best{0};
  for (T v : values) best = std::max(best, std::abs(v));
  return best;
}

template <typename T>
T linf_distance(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ShapeError("linf_distance: length mismatch");
  T best{0};
  for (std::size_t i = 0; i < a.size(); ++i) best = std::max(best, std::abs(a[i] - b[i]));
  return best;
}

template <typename T>
DenseMatrix<T> relu(const DenseMatrix<T>& m) {
  DenseMatrix<T> out = m;
  for (T& v : out.values()) v = v > T{0} ? v : T{0};
  return out;
}

template <typename T>
DenseMatrix<T> relu_grad(const DenseMatrix<T>& m) {
  DenseMatrix<T> out(m.rows(), m.cols());
  auto src = m.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T{0} ? T{1} : T{0};
  return out;
}

template <typename T>
DenseMatrix<T> softmax_rows(const DenseMatrix<T>& m) {
  DenseMatrix<T> out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto src = m.row(r);
    auto dst = out.row(r);
    if (src.empty()) continue;
    const T peak = *std::max_element(src.begin(), src.end());
    T total{0};
    for (std::size_t c = 0; c < src.size(); ++c) {
      dst[c] = std::exp(src[c] - peak);
      total += dst[c];
    }
    for (T& v : dst) v /= total;
  }
  return out;
}

#define CDFGNN_INSTANTIATE_TENSOR(T)                                                    \
  template struct CsrMatrix<T>;                                                         \
  template DenseMatrix<T> spmm(const CsrMatrix<T>&, const DenseMatrix<T>&);             \
  template DenseMatrix<T> matmul(const DenseMatrix<T>&, const DenseMatrix<T>&);         \
  template DenseMatrix<T> matmul_transpose_a(const DenseMatrix<T>&, const DenseMatrix<T>&); \
  template DenseMatrix<T> matmul_transpose_b(const DenseMatrix<T>&, const DenseMatrix<T>&); \
  template DenseMatrix<T> transpose(const DenseMatrix<T>&);                             \
  template DenseMatrix<T> add(const DenseMatrix<T>&, const DenseMatrix<T>&);            \
  template DenseMatrix<T> sub(const DenseMatrix<T>&, const DenseMatrix<T>&);            \
  template DenseMatrix<T> hadamard(const DenseMatrix<T>&, const DenseMatrix<T>&);       \
  template void add_inplace(DenseMatrix<T>&, const DenseMatrix<T>&);                    \
  template T linf_norm(std::span<const T>);                                             \
  template T linf_distance(std::span<const T>, std::span<const T>);                     \
  template DenseMatrix<T> relu(const DenseMatrix<T>&);                                  \
  template DenseMatrix<T> relu_grad(const DenseMatrix<T>&);                             \
  template DenseMatrix<T> softmax_rows(const DenseMatrix<T>&);

CDFGNN_INSTANTIATE_TENSOR(float)
CDFGNN_INSTANTIATE_TENSOR(double)

#undef CDFGNN_INSTANTIATE_TENSOR

}  // namespace cdfgnn
