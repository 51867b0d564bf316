#include <gtest/gtest.h>

#include <cmath>

#include "cdfgnn/error.hpp"
#include "cdfgnn/gcn_engine.hpp"
#include "cdfgnn/partitioner.hpp"
#include "cdfgnn/reference_oracle.hpp"
#include "support.hpp"

using namespace cdfgnn;
using testing_support::random_matrix;

namespace {

CsrMatrix<double> identity_csr(std::size_t n) {
  CsrMatrix<double> a;
  a.rows = a.cols = n;
  for (std::uint32_t i = 0; i < n; ++i) {
    a.col_idx.push_back(i);
    a.values.push_back(1.0);
    a.row_ptr.push_back(i + 1);
  }
  return a;
}

DenseMatrix<double> dense_product(const DenseMatrix<double>& a, const DenseMatrix<double>& b) {
  DenseMatrix<double> c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      for (std::size_t k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
    }
  }
  return c;
}

// Cross-entropy of one row written out with no shared helpers.
double scalar_ce(const std::vector<double>& z, std::size_t label) {
  double denom = 0.0;
  for (double x : z) denom += std::exp(x);
  return -std::log(std::exp(z[label]) / denom);
}

}  // namespace

TEST(Dims, LayerChain) {
  EXPECT_EQ(layer_dims(32, 64, 4), (std::vector<std::size_t>{32, 64, 4}));
  EXPECT_EQ(layer_dims(8, 16, 3, 3), (std::vector<std::size_t>{8, 16, 16, 3}));
  EXPECT_EQ(layer_dims(8, 16, 3, 1), (std::vector<std::size_t>{8, 3}));
  EXPECT_THROW(layer_dims(8, 16, 3, 0), ArgumentError);
}

TEST(Params, GlorotDeterministicAndBounded) {
  const std::vector<std::size_t> dims{32, 64, 4};
  const auto a = ModelParams<double>::glorot(dims, 3);
  EXPECT_EQ(a, ModelParams<double>::glorot(dims, 3));
  EXPECT_NE(a, ModelParams<double>::glorot(dims, 4));
  a.validate();
  for (std::size_t l = 0; l < 2; ++l) {
    const double limit = std::sqrt(6.0 / double(dims[l] + dims[l + 1]));
    EXPECT_LE(linf_norm(a.weights[l]), limit);
    EXPECT_GT(linf_norm(a.weights[l]), 0.5 * limit);
  }
  const auto f = cast_params<float>(a);
  EXPECT_EQ(f.weights[1](0, 0), float(a.weights[1](0, 0)));
  ModelParams<double> broken{{DenseMatrix<double>(2, 3), DenseMatrix<double>(4, 1)}};
  EXPECT_THROW(broken.validate(), ShapeError);
}

TEST(Forward, IdentityAndEmptyRows) {
  Rng rng(1);
  const auto h = random_matrix(rng, 4, 3);
  EXPECT_EQ(forward_local(h, DenseMatrix<double>::identity(3), identity_csr(4)), h);
  CsrMatrix<double> empty;
  empty.rows = empty.cols = 4;
  empty.row_ptr.assign(5, 0);
  EXPECT_EQ(forward_local(h, random_matrix(rng, 3, 2), empty), DenseMatrix<double>(4, 2));
}

TEST(Forward, MatchesDenseProductOnWorkerSubgraph) {
  const Graph g = gen_power_law(5, 2, 4);
  const auto plan = partition(g, {1, 2}).plan;
  const auto a = normalize<double>(g).to_dense();
  Rng rng(4);
  const auto h = random_matrix(rng, 5, 3);
  const auto w = random_matrix(rng, 3, 2);
  for (const auto& wp : plan.workers) {
    // Worker-local normalized adjacency over global IDs.
    CsrMatrix<double> local;
    local.rows = local.cols = 5;
    DenseMatrix<double> dense(5, 5);
    for (const auto& e : wp.edges) {
      const VertexId u = wp.local_to_global[e.a];
      const VertexId v = wp.local_to_global[e.b];
      dense(u, v) = dense(v, u) = a(u, v);
    }
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::uint32_t j = 0; j < 5; ++j) {
        if (dense(i, j) != 0.0) {
          local.col_idx.push_back(j);
          local.values.push_back(dense(i, j));
        }
      }
      local.row_ptr.push_back(local.col_idx.size());
    }
    const auto got = forward_local(h, w, local);
    const auto want = dense_product(dense_product(dense, h), w);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-12);
  }
}

TEST(Activate, HiddenReluFinalIdentity) {
  const DenseMatrix<double> z(1, 2, {-1, 2});
  EXPECT_EQ(activate(z, false), DenseMatrix<double>(1, 2, {0, 2}));
  EXPECT_EQ(activate(z, true), z);
}

TEST(Loss, UniformLogitsGiveLnK) {
  const DenseMatrix<double> logits(2, 5, 0.3);
  const std::vector<std::uint32_t> labels{1, 4};
  const std::vector<VertexRole> roles{VertexRole::kTrain, VertexRole::kTrain};
  const std::vector<std::uint8_t> master{1, 1};
  const auto r = loss_and_output_grad(logits, labels, roles, master, 1.0);
  EXPECT_NEAR(r.loss_sum, 2 * std::log(5.0), 1e-14);
}

TEST(Loss, ConfidentCorrectLogitsGiveZero) {
  DenseMatrix<double> logits(1, 3);
  logits(0, 2) = 200.0;
  const std::vector<std::uint32_t> labels{2};
  const std::vector<VertexRole> roles{VertexRole::kTrain};
  const std::vector<std::uint8_t> master{1};
  const auto r = loss_and_output_grad(logits, labels, roles, master, 1.0);
  EXPECT_LT(r.loss_sum, 1e-80);
  EXPECT_LT(linf_norm(r.grad), 1e-80);
  EXPECT_EQ(r.train_correct, 1u);
}

TEST(Loss, MatchesScalarOracle) {
  const DenseMatrix<double> logits(3, 3, {0.2, -1.0, 0.5, 1.5, 0.0, -0.3, -2.0, 2.0, 0.1});
  const std::vector<std::uint32_t> labels{2, 0, 0};
  const std::vector<VertexRole> roles(3, VertexRole::kTrain);
  const std::vector<std::uint8_t> master{1, 1, 1};
  const auto r = loss_and_output_grad(logits, labels, roles, master, 3.0);
  double want = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    want += scalar_ce({logits(i, 0), logits(i, 1), logits(i, 2)}, labels[i]);
  }
  EXPECT_NEAR(r.loss_sum, want, 1e-12);
  EXPECT_EQ(r.train_correct, 2u);
  for (std::size_t i = 0; i < 3; ++i) {
    double denom = 0.0;
    for (std::size_t c = 0; c < 3; ++c) denom += std::exp(logits(i, c));
    for (std::size_t c = 0; c < 3; ++c) {
      const double p = std::exp(logits(i, c)) / denom;
      EXPECT_NEAR(r.grad(i, c), (p - (c == labels[i])) / 3.0, 1e-15);
    }
  }
}

TEST(Loss, OnlyMasterTrainRowsContribute) {
  const DenseMatrix<double> logits(4, 2, {1, 0, 1, 0, 0, 1, 1, 0});
  const std::vector<std::uint32_t> labels{0, 0, 0, 1};
  const std::vector<VertexRole> roles{VertexRole::kTrain, VertexRole::kTrain, VertexRole::kVal, VertexRole::kTest};
  const std::vector<std::uint8_t> master{1, 0, 1, 1};
  const auto r = loss_and_output_grad(logits, labels, roles, master, 1.0);
  EXPECT_EQ(r.train_total, 1u);
  EXPECT_EQ(r.val_total, 1u);
  EXPECT_EQ(r.val_correct, 0u);
  EXPECT_EQ(r.test_total, 1u);
  EXPECT_EQ(r.test_correct, 0u);
  for (std::size_t c = 0; c < 2; ++c) {
    EXPECT_EQ(r.grad(1, c), 0.0);
    EXPECT_EQ(r.grad(2, c), 0.0);
  }
  const std::vector<std::uint32_t> bad{0, 0, 0, 7};
  EXPECT_THROW(loss_and_output_grad(logits, bad, roles, master, 1.0), BoundsError);
  EXPECT_THROW(loss_and_output_grad(logits, labels, roles, master, 0.0), ArgumentError);
}

TEST(Backward, ZeroAndIdentityCases) {
  Rng rng(2);
  const auto z = random_matrix(rng, 4, 3, 0.1, 1.0);
  EXPECT_EQ(backward_local(DenseMatrix<double>(4, 3), identity_csr(4), random_matrix(rng, 3, 3), z),
            DenseMatrix<double>(4, 3));
  const auto delta = random_matrix(rng, 4, 3);
  EXPECT_EQ(backward_local(delta, identity_csr(4), DenseMatrix<double>::identity(3), z), delta);
  EXPECT_EQ(param_grad(DenseMatrix<double>(4, 2), identity_csr(4), random_matrix(rng, 4, 3)),
            DenseMatrix<double>(3, 2));
}

TEST(Backward, TwoLayerGradientsMatchFiniteDifferences) {
  const Graph g = gen_power_law(30, 2, 8);
  const auto data = gen_planted_features(g, 3, 5, 0.3, 8);
  const auto adj = normalize<double>(g);
  const auto params = ModelParams<double>::glorot(layer_dims(5, 6, 3), 8);
  const auto exact = oracle_forward_backward(adj, data.features.values, data.labels, params);
  const auto fd = finite_difference_params(adj, data.features.values, data.labels, params, 1e-6);
  for (std::size_t l = 0; l < 2; ++l) {
    EXPECT_LE(normwise_relative_error(exact.grads[l].values(), fd[l].values()), 1e-4) << "layer " << l;
  }
}

TEST(Optimizer, ZeroGradientLeavesParams) {
  ModelParams<double> p{{DenseMatrix<double>(1, 1, {1.5})}};
  const auto before = p;
  for (auto kind : {OptimizerKind::kSgd, OptimizerKind::kAdam}) {
    OptimizerConfig c;
    c.kind = kind;
    Optimizer<double> opt(c, p);
    const std::vector<DenseMatrix<double>> g{DenseMatrix<double>(1, 1)};
    opt.step(p, g);
    EXPECT_EQ(p, before);
  }
}

TEST(Optimizer, SgdSingleStep) {
  ModelParams<double> p{{DenseMatrix<double>(1, 1, {1.0})}};
  OptimizerConfig c;
  c.lr = 0.1;
  Optimizer<double> opt(c, p);
  const std::vector<DenseMatrix<double>> g{DenseMatrix<double>(1, 1, {2.0})};
  opt.step(p, g);
  EXPECT_DOUBLE_EQ(p.weights[0](0, 0), 0.8);
}

TEST(Optimizer, AdamFirstStepByHand) {
  ModelParams<double> p{{DenseMatrix<double>(1, 1, {1.0})}};
  OptimizerConfig c;
  c.kind = OptimizerKind::kAdam;
  c.lr = 0.01;
  Optimizer<double> opt(c, p);
  const std::vector<DenseMatrix<double>> g{DenseMatrix<double>(1, 1, {2.0})};
  opt.step(p, g);
  // m = 0.1*2, v = 0.001*4; bias-corrected m^ = 2, v^ = 4.
  const double m_hat = (0.1 * 2.0) / (1 - 0.9);
  const double v_hat = (0.001 * 4.0) / (1 - 0.999);
  EXPECT_NEAR(p.weights[0](0, 0), 1.0 - 0.01 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-12);
}

TEST(Optimizer, PerLayerStepsEqualFullStep) {
  Rng rng(3);
  ModelParams<double> a{{random_matrix(rng, 3, 4), random_matrix(rng, 4, 2)}};
  auto b = a;
  OptimizerConfig c;
  c.kind = OptimizerKind::kAdam;
  Optimizer<double> oa(c, a);
  Optimizer<double> ob(c, b);
  for (int t = 0; t < 5; ++t) {
    const std::vector<DenseMatrix<double>> g{random_matrix(rng, 3, 4), random_matrix(rng, 4, 2)};
    oa.step(a, g);
    ob.step_layer(b, 1, g[1]);
    ob.step_layer(b, 0, g[0]);
  }
  EXPECT_EQ(a, b);
  const std::vector<DenseMatrix<double>> wrong{DenseMatrix<double>(1, 1)};
  EXPECT_THROW(oa.step(a, wrong), ShapeError);
}
