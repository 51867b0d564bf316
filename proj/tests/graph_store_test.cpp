#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdfgnn/error.hpp"
#include "cdfgnn/graph_store.hpp"
#include "support.hpp"

using namespace cdfgnn;
using testing_support::graph_of;
using testing_support::TempDir;

TEST(EdgeList, ParsesHeaderAndEdges) {
  const Graph g = parse_edge_list("n 3\n0 1\n1 2\n");
  EXPECT_EQ(g.num_vertices(), 3u);
  EXPECT_EQ(g.num_edges(), 2u);
  EXPECT_EQ(std::vector<std::uint32_t>(g.degrees().begin(), g.degrees().end()), (std::vector<std::uint32_t>{1, 2, 1}));
}

TEST(EdgeList, DropsDuplicatesInEitherOrientation) {
  EXPECT_EQ(parse_edge_list("0 1\n0 1\n").num_edges(), 1u);
  EXPECT_EQ(parse_edge_list("0 1\n1 0\n").num_edges(), 1u);
}

TEST(EdgeList, EndpointBeyondDeclaredCountIsBoundsError) {
  EXPECT_THROW(parse_edge_list("n 3\n0 5\n"), BoundsError);
}

TEST(EdgeList, MalformedLineReportsLineNumber) {
  try {
    parse_edge_list("n 3\n0 1\n1 x\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(parse_edge_list("0 1 2\n"), ParseError);
  EXPECT_THROW(parse_edge_list("1 1\n"), ParseError);
}

TEST(EdgeList, CommentsAndRoundTrip) {
  const Graph g = parse_edge_list("# comment\nn 5\n0 1\n# more\n3 2\n4 0\n");
  const Graph back = parse_edge_list(format_edge_list(g));
  EXPECT_EQ(back.num_vertices(), g.num_vertices());
  EXPECT_TRUE(std::equal(g.edges().begin(), g.edges().end(), back.edges().begin(), back.edges().end()));
}

TEST(EdgeList, MissingFileIsIoError) { EXPECT_THROW(load_edge_list("/nonexistent/graph.edges"), IoError); }

TEST(Graph, AdjacencyIsSymmetricSortedAndMatchesDegree) {
  const Graph g = gen_power_law(300, 3, 5);
  std::size_t degree_sum = 0;
  for (VertexId v = 0; v < g.num_vertices(); ++v) {
    const auto nb = g.neighbors(v);
    EXPECT_EQ(nb.size(), g.degree(v));
    EXPECT_TRUE(std::is_sorted(nb.begin(), nb.end()));
    EXPECT_EQ(std::adjacent_find(nb.begin(), nb.end()), nb.end());
    for (VertexId u : nb) {
      const auto back = g.neighbors(u);
      EXPECT_TRUE(std::binary_search(back.begin(), back.end(), v));
    }
    degree_sum += g.degree(v);
  }
  EXPECT_EQ(degree_sum, 2 * g.num_edges());
}

TEST(Graph, SelfLoopRejected) {
  const std::vector<Edge> e{{2, 2}};
  EXPECT_THROW(Graph::from_edges(3, e), ArgumentError);
}

TEST(Normalize, SingleEdgeTriangleAndStar) {
  const auto single = normalize<double>(graph_of(2, {{0, 1}}));
  EXPECT_EQ(single.values, (std::vector<double>{1.0, 1.0}));

  const auto tri = normalize<double>(graph_of(3, {{0, 1}, {1, 2}, {0, 2}}));
  for (double w : tri.values) EXPECT_EQ(w, 0.5);

  // 1/sqrt(3) to 20 digits.
  const double inv_sqrt3 = 0.57735026918962576451;
  const auto star = normalize<double>(graph_of(4, {{0, 1}, {0, 2}, {0, 3}}));
  for (double w : star.values) EXPECT_NEAR(w, inv_sqrt3, 1e-15);
}

TEST(Normalize, WeightsSymmetricAndInUnitInterval) {
  const Graph g = gen_power_law(200, 2, 9);
  const auto a = normalize<double>(g);
  a.validate();
  const auto d = a.to_dense();
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t j = 0; j < d.cols(); ++j) {
      EXPECT_EQ(d(i, j), d(j, i));
      if (d(i, j) != 0.0) {
        EXPECT_GT(d(i, j), 0.0);
        EXPECT_LE(d(i, j), 1.0);
      }
    }
  }
}

TEST(Normalize, IsolatedVertexHasEmptyRow) {
  const auto a = normalize<double>(graph_of(3, {{0, 1}}));
  EXPECT_EQ(a.row_cols(2).size(), 0u);
}

TEST(Features, RoundTripBothDtypes) {
  TempDir dir("feat");
  FeatureMatrix f{DenseMatrix<double>(2, 3, {0.5, -1.25, 3.0, 1e-3, 2.0, -0.0})};
  write_features(f, dir / "a.feat", FeatureDtype::kF64);
  EXPECT_EQ(load_features(dir / "a.feat").values, f.values);
  write_features(f, dir / "b.feat", FeatureDtype::kF32);
  const auto g = load_features(dir / "b.feat");
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(g.values.values()[i], double(float(f.values.values()[i])));
}

TEST(Features, TruncatedFileIsIntegrityError) {
  TempDir dir("feat_trunc");
  FeatureMatrix f{DenseMatrix<double>(4, 4, 1.0)};
  write_features(f, dir / "x.feat", FeatureDtype::kF64);
  auto bytes = testing_support::slurp(dir / "x.feat");
  bytes.resize(bytes.size() - 5);
  testing_support::spit(dir / "x.feat", bytes);
  EXPECT_THROW(load_features(dir / "x.feat"), IntegrityError);
}

TEST(Features, NonFiniteValueRejected) {
  TempDir dir("feat_nan");
  FeatureMatrix f{DenseMatrix<double>(1, 2, {1.0, std::nan("")})};
  write_features(f, dir / "x.feat", FeatureDtype::kF64);
  EXPECT_THROW(load_features(dir / "x.feat"), IntegrityError);
}

TEST(Labels, ParseValidateAndRoundTrip) {
  const LabelSet l = parse_labels("k 3\n0 T\n2 V\n1 E\n0 N\n");
  EXPECT_EQ(l.num_classes, 3u);
  EXPECT_EQ(l.count(VertexRole::kTrain), 1u);
  EXPECT_EQ(l.count(VertexRole::kVal), 1u);
  EXPECT_EQ(l.count(VertexRole::kTest), 1u);
  l.validate(4);
  TempDir dir("labels");
  write_labels(l, dir / "l.labels");
  const auto back = load_labels(dir / "l.labels");
  EXPECT_EQ(back.labels, l.labels);
  EXPECT_EQ(back.roles, l.roles);
}

TEST(Labels, OutOfRangeLabelIsBoundsError) {
  EXPECT_THROW(parse_labels("k 2\n5 T\n").validate(1), BoundsError);
  EXPECT_THROW(parse_labels("k 2\n0 Q\n"), ParseError);
}

TEST(PowerLaw, DeterministicPerSeed) {
  const Graph a = gen_power_law(10, 2, 1);
  const Graph b = gen_power_law(10, 2, 1);
  EXPECT_TRUE(std::equal(a.edges().begin(), a.edges().end(), b.edges().begin(), b.edges().end()));
}

TEST(PowerLaw, EdgeCountNearMTimesN) {
  const Graph g = gen_power_law(1000, 3, 4);
  // Seed clique on m+1 vertices, then m edges per new vertex.
  EXPECT_EQ(g.num_edges(), 6u + 3u * (1000u - 4u));
}

TEST(PowerLaw, HeavyTail) {
  const Graph g = gen_power_law(1000, 3, 7);
  std::vector<std::uint32_t> d(g.degrees().begin(), g.degrees().end());
  std::sort(d.begin(), d.end());
  const double median = d[d.size() / 2];
  EXPECT_GT(double(d.back()), 10.0 * median);
}

TEST(PowerLaw, RejectsTooFewVertices) { EXPECT_THROW(gen_power_law(3, 3, 1), ArgumentError); }

TEST(Planted, ZeroNoiseGivesIdenticalClassFeatures) {
  const Graph g = gen_power_law(100, 2, 3);
  const auto d = gen_planted_features(g, 3, 8, 0.0, 3);
  for (VertexId u = 0; u < 100; ++u) {
    for (VertexId v = 0; v < 100; ++v) {
      if (d.labels.labels[u] != d.labels.labels[v]) continue;
      EXPECT_TRUE(std::equal(d.features.values.row(u).begin(), d.features.values.row(u).end(),
                             d.features.values.row(v).begin()));
    }
  }
}

TEST(Planted, DeterministicAndSplit) {
  const Graph g = gen_power_law(500, 3, 2);
  const auto a = gen_planted_features(g, 4, 16, 0.1, 2);
  const auto b = gen_planted_features(g, 4, 16, 0.1, 2);
  EXPECT_EQ(a.features.values, b.features.values);
  EXPECT_EQ(a.labels.labels, b.labels.labels);
  EXPECT_EQ(a.labels.count(VertexRole::kTrain), 300u);
  EXPECT_EQ(a.labels.count(VertexRole::kVal), 100u);
  EXPECT_EQ(a.labels.count(VertexRole::kTest), 100u);
  a.labels.validate(500);
}

// Softmax regression on raw features, trained by plain gradient descent.
TEST(Planted, LinearProbeSeparatesClasses) {
  const Graph g = gen_power_law(2000, 3, 11);
  const auto d = gen_planted_features(g, 4, 32, 0.1, 11);
  const std::size_t k = 4;
  const std::size_t f = 32;
  std::vector<double> w(f * k, 0.0);
  std::vector<double> b(k, 0.0);
  std::vector<std::size_t> train;
  for (std::size_t v = 0; v < 2000; ++v) {
    if (d.labels.roles[v] == VertexRole::kTrain) train.push_back(v);
  }
  auto scores = [&](std::size_t v) {
    std::vector<double> s(b);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < f; ++j) s[c] += d.features.values(v, j) * w[j * k + c];
    }
    return s;
  };
  for (int it = 0; it < 300; ++it) {
    std::vector<double> gw(f * k, 0.0);
    std::vector<double> gb(k, 0.0);
    for (std::size_t v : train) {
      auto s = scores(v);
      const double mx = *std::max_element(s.begin(), s.end());
      double z = 0.0;
      for (auto& x : s) z += (x = std::exp(x - mx));
      for (std::size_t c = 0; c < k; ++c) {
        const double r = s[c] / z - (c == d.labels.labels[v] ? 1.0 : 0.0);
        gb[c] += r;
        for (std::size_t j = 0; j < f; ++j) gw[j * k + c] += r * d.features.values(v, j);
      }
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= 2.0 * gw[i] / double(train.size());
    for (std::size_t c = 0; c < k; ++c) b[c] -= 2.0 * gb[c] / double(train.size());
  }
  std::size_t correct = 0;
  for (std::size_t v : train) {
    const auto s = scores(v);
    correct += std::size_t(std::max_element(s.begin(), s.end()) - s.begin()) == d.labels.labels[v];
  }
  EXPECT_GT(double(correct) / double(train.size()), 0.90);
}
