#include <gtest/gtest.h>

#include <cmath>

#include "cdfgnn/tensor_math.hpp"
#include "support.hpp"

using namespace cdfgnn;
using testing_support::random_matrix;

namespace {

DenseMatrix<double> naive_product(const DenseMatrix<double>& a, const DenseMatrix<double>& b) {
  DenseMatrix<double> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  }
  return c;
}

CsrMatrix<double> random_csr(Rng& rng, std::size_t n, double density) {
  CsrMatrix<double> m;
  m.rows = m.cols = n;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < n; ++j) {
      if (rng.uniform01() < density) {
        m.col_idx.push_back(j);
        m.values.push_back(rng.uniform(-1.0, 1.0));
      }
    }
    m.row_ptr.push_back(m.col_idx.size());
  }
  return m;
}

double scan_max_abs(const DenseMatrix<double>& m) {
  double best = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) best = std::max(best, std::abs(m(i, j)));
  }
  return best;
}

}  // namespace

TEST(Spmm, IdentityPatternReturnsInput) {
  CsrMatrix<double> id;
  id.rows = id.cols = 3;
  id.row_ptr = {0, 1, 2, 3};
  id.col_idx = {0, 1, 2};
  id.values = {1, 1, 1};
  const DenseMatrix<double> x(3, 2, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(spmm(id, x), x);
}

TEST(Spmm, SingleEdgeSwapsRows) {
  CsrMatrix<double> a;
  a.rows = a.cols = 2;
  a.row_ptr = {0, 1, 2};
  a.col_idx = {1, 0};
  a.values = {1, 1};
  EXPECT_EQ(spmm(a, DenseMatrix<double>(2, 1, {2, 3})), DenseMatrix<double>(2, 1, {3, 2}));
}

TEST(Spmm, MatchesDenseReference) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_csr(rng, 8, 0.4);
    a.validate();
    const auto x = random_matrix(rng, 8, 5);
    const auto got = spmm(a, x);
    const auto want = naive_product(a.to_dense(), x);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-12);
  }
}

TEST(Spmm, ShapeMismatchThrows) {
  CsrMatrix<double> a;
  a.rows = a.cols = 2;
  a.row_ptr = {0, 0, 0};
  EXPECT_THROW(spmm(a, DenseMatrix<double>(3, 1)), ShapeError);
}

TEST(Csr, ValidateRejectsUnsortedColumns) {
  CsrMatrix<double> a;
  a.rows = a.cols = 2;
  a.row_ptr = {0, 2, 2};
  a.col_idx = {1, 0};
  a.values = {1, 1};
  EXPECT_THROW(a.validate(), IntegrityError);
}

TEST(Matmul, IdentityAndNaiveOracle) {
  Rng rng(5);
  const auto a = random_matrix(rng, 3, 3);
  EXPECT_EQ(matmul(a, DenseMatrix<double>::identity(3)), a);
  const auto b = random_matrix(rng, 3, 3);
  const auto got = matmul(a, b);
  const auto want = naive_product(a, b);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-15);
  EXPECT_THROW(matmul(a, DenseMatrix<double>(2, 3)), ShapeError);
}

TEST(Matmul, TransposedVariantsAgreeWithExplicitTranspose) {
  Rng rng(6);
  const auto a = random_matrix(rng, 4, 3);
  const auto b = random_matrix(rng, 4, 2);
  const auto c = random_matrix(rng, 5, 3);
  const auto ta = matmul_transpose_a(a, b);
  const auto ref_a = naive_product(transpose(a), b);
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_NEAR(ta.values()[i], ref_a.values()[i], 1e-15);
  const auto tb = matmul_transpose_b(a, c);
  const auto ref_b = naive_product(a, transpose(c));
  for (std::size_t i = 0; i < tb.size(); ++i) EXPECT_NEAR(tb.values()[i], ref_b.values()[i], 1e-15);
}

TEST(Elementwise, HadamardAddSub) {
  const DenseMatrix<double> a(2, 2, {1, -2, 3, 4});
  EXPECT_EQ(hadamard(a, DenseMatrix<double>(2, 2)), DenseMatrix<double>(2, 2));
  EXPECT_EQ(sub(add(a, a), a), a);
  auto c = a;
  add_inplace(c, a);
  EXPECT_EQ(c, add(a, a));
  EXPECT_THROW(hadamard(a, DenseMatrix<double>(1, 2)), ShapeError);
}

TEST(Norm, LinfExamples) {
  EXPECT_EQ(linf_norm(DenseMatrix<double>(1, 2, {-3, 2})), 3.0);
  EXPECT_EQ(linf_norm(DenseMatrix<double>(2, 2)), 0.0);
  Rng rng(8);
  for (int t = 0; t < 50; ++t) {
    const auto m = random_matrix(rng, 4, 6, -10, 10);
    EXPECT_EQ(linf_norm(m), scan_max_abs(m));
  }
  const std::vector<double> x{1, 5, -2};
  const std::vector<double> y{1.5, 5, 2};
  EXPECT_EQ(linf_distance<double>(x, y), 4.0);
}

TEST(Activation, ReluAndGradConvention) {
  EXPECT_EQ(relu(DenseMatrix<double>(1, 2, {-1, 2})), DenseMatrix<double>(1, 2, {0, 2}));
  EXPECT_EQ(relu_grad(DenseMatrix<double>(1, 3, {-1, 0, 2})), DenseMatrix<double>(1, 3, {0, 0, 1}));
}

TEST(Activation, SoftmaxRows) {
  const auto s = softmax_rows(DenseMatrix<double>(1, 4, {7, 7, 7, 7}));
  for (double x : s.values()) EXPECT_DOUBLE_EQ(x, 0.25);
  const auto big = softmax_rows(DenseMatrix<double>(1, 2, {1000, 0}));
  EXPECT_TRUE(std::isfinite(big(0, 1)));
  EXPECT_DOUBLE_EQ(big(0, 0), 1.0);
  const auto r = softmax_rows(DenseMatrix<double>(2, 3, {1, 2, 3, -1, 0, 4}));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(r(i, 0) + r(i, 1) + r(i, 2), 1.0, 1e-15);
  EXPECT_NEAR(r(0, 2) / r(0, 1), std::exp(1.0), 1e-12);
}

// Sub-multiplicative L-inf bounds over random operand pairs; shapes and
// scales vary so the bounds are exercised away from trivial cases.
TEST(NormBounds, ThreeInequalitiesOnRandomPairs) {
  Rng rng(2024);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t r = 1 + rng.uniform_index(6);
    const std::size_t k = 1 + rng.uniform_index(6);
    const std::size_t c = 1 + rng.uniform_index(6);
    const double scale = std::pow(10.0, rng.uniform(-3, 3));
    const auto a = random_matrix(rng, r, k, -scale, scale);
    const auto b = random_matrix(rng, r, k, -scale, scale);
    const auto d = random_matrix(rng, k, c, -scale, scale);
    const double na = linf_norm(a);
    const double nb = linf_norm(b);
    const double nd = linf_norm(d);
    const double slack = 1 + 1e-12;
    violations += linf_norm(add(a, b)) > (na + nb) * slack;
    violations += linf_norm(hadamard(a, b)) > na * nb * slack;
    violations += linf_norm(matmul(a, d)) > double(a.cols()) * na * nd * slack;
  }
  EXPECT_EQ(violations, 0);
}
