#include <gtest/gtest.h>

#include <algorithm>

#include "cdfgnn/error.hpp"
#include "cdfgnn/vertex_cache.hpp"
#include "support.hpp"

using namespace cdfgnn;
using testing_support::graph_of;

namespace {

// Vertex 1 is shared by worker 0 (master, first edge) and worker 1.
PartitionPlan two_worker_plan() {
  static const Graph g = graph_of(3, {{0, 1}, {1, 2}});
  const std::vector<WorkerId> assign{0, 1};
  return plan_from_assignment(g, {1, 2}, g.edges(), assign);
}

// Vertex 0 on workers 0, 1, 2 with worker 0 as master.
PartitionPlan three_replica_plan() {
  static const Graph g = graph_of(4, {{0, 1}, {0, 2}, {0, 3}});
  const std::vector<WorkerId> assign{0, 1, 2};
  return plan_from_assignment(g, {1, 3}, g.edges(), assign);
}

DenseMatrix<double> column(std::initializer_list<double> v) { return DenseMatrix<double>(v.size(), 1, v); }

const PayloadCodec<double> kLossless;

}  // namespace

TEST(ShouldSend, Examples) {
  const std::vector<double> zero{0, 0};
  const std::vector<double> x{0.1, 0};
  EXPECT_TRUE(should_send<double>(x, zero, 0.0));
  EXPECT_TRUE(should_send<double>(x, zero, 0.3));
  EXPECT_FALSE(should_send<double>(x, x, 0.0));
  const std::vector<double> snap{1, 2};
  const std::vector<double> cur{1.05, 2.0};
  EXPECT_FALSE(should_send<double>(cur, snap, 0.1));
  EXPECT_TRUE(should_send<double>(cur, snap, 0.01));
  const std::vector<double> shorter{1};
  EXPECT_THROW(should_send<double>(shorter, snap, 0.1), ShapeError);
}

TEST(Epsilon, FirstUpdateOnlyPrimesMean) {
  EpsilonController c;
  EXPECT_EQ(c.update(0.3), 0.01);
  EXPECT_TRUE(c.primed());
  EXPECT_EQ(c.mean_acc(), 0.3);
}

TEST(Epsilon, LoosenBranch) {
  EpsilonConfig cfg;
  cfg.eps_init = 0.1;
  EpsilonController c(cfg);
  c.update(0.6);
  EXPECT_DOUBLE_EQ(c.update(0.5), 0.105);
  EXPECT_DOUBLE_EQ(c.mean_acc(), 0.8 * 0.6 + 0.2 * 0.5);
}

TEST(Epsilon, TightenBranch) {
  EpsilonConfig cfg;
  cfg.eps_init = 0.005;
  EpsilonController c(cfg);
  c.update(0.6);
  EXPECT_DOUBLE_EQ(c.update(0.9), 0.0045);
}

TEST(Epsilon, InsideBandUnchanged) {
  EpsilonConfig cfg;
  cfg.eps_init = 0.05;
  EpsilonController c(cfg);
  c.update(0.6);
  EXPECT_EQ(c.update(0.6 - 0.0005), 0.05);
  cfg.adaptive = false;
  EpsilonController fixed(cfg);
  fixed.update(0.1);
  EXPECT_EQ(fixed.update(0.9), 0.05);
}

TEST(Epsilon, StaysWithinBoundsUnderRandomAccuracy) {
  Rng rng(77);
  for (int run = 0; run < 200; ++run) {
    EpsilonConfig cfg;
    cfg.eps_init = rng.uniform(cfg.nu2, cfg.nu1);
    EpsilonController c(cfg);
    for (int e = 0; e < 300; ++e) {
      const double eps = c.update(rng.uniform01());
      ASSERT_GE(eps, cfg.nu2);
      ASSERT_LE(eps, cfg.nu1);
    }
  }
}

TEST(Cache, OnlyReplicatedVerticesTakePart) {
  const auto plan = two_worker_plan();
  VertexCache<double> w0(plan, 0, 1, false);
  VertexCache<double> w1(plan, 1, 1, false);
  EXPECT_EQ(w0.replicated_count(), 1u);
  EXPECT_EQ(w1.replicated_count(), 1u);
  EXPECT_THROW(VertexCache<double>(plan, 2, 1, false), ArgumentError);
}

TEST(Cache, ThreeReplicasSumToSix) {
  const auto plan = three_replica_plan();
  std::vector<VertexCache<double>> caches;
  for (WorkerId w = 0; w < 3; ++w) caches.emplace_back(plan, w, 1, false);
  // Local ID of vertex 0 is 0 on every worker.
  const std::vector<DenseMatrix<double>> local{column({1, 0}), column({2, 0}), column({3, 0})};
  std::vector<VertexMessage<double>> to_master;
  for (WorkerId w = 1; w < 3; ++w) {
    auto out = caches[w].mirror_pass(local[w], 0.0, kLossless);
    to_master.insert(to_master.end(), out.begin(), out.end());
  }
  const auto active = caches[0].master_pass(to_master, local[0], 0.0, kLossless);
  EXPECT_EQ(active, (std::vector<LocalId>{0}));
  const auto scatter = caches[0].scatter_pass(active, kLossless);
  ASSERT_EQ(scatter.size(), 2u);
  for (WorkerId w = 1; w < 3; ++w) {
    std::vector<VertexMessage<double>> mine;
    for (const auto& m : scatter) {
      if (m.dest == w) mine.push_back(m);
    }
    caches[w].apply_scatter(mine, kLossless);
  }
  for (WorkerId w = 0; w < 3; ++w) EXPECT_EQ(caches[w].synced(local[w])(0, 0), 6.0);
  // Non-replicated rows pass through.
  EXPECT_EQ(caches[1].synced(local[1])(1, 0), 0.0);
}

TEST(Cache, MirrorSendSetMatchesPredicate) {
  // Vertices 0, 1, 2 each shared by workers 0 (master) and 1.
  static const Graph g = graph_of(4, {{0, 3}, {1, 3}, {2, 3}, {0, 1}, {1, 2}, {0, 2}});
  const std::vector<WorkerId> assign{0, 0, 0, 1, 1, 1};
  const auto plan = plan_from_assignment(g, {1, 2}, g.edges(), assign);
  VertexCache<double> mirror(plan, 1, 2, true);
  const DenseMatrix<double> first(3, 2, {1, 1, 2, 2, 3, 3});
  EXPECT_EQ(mirror.mirror_pass(first, 0.1, kLossless).size(), 3u);
  const DenseMatrix<double> drift(3, 2, {1.05, 1, 2, 2.5, 3, 3});
  const auto sent = mirror.mirror_pass(drift, 0.1, kLossless);
  std::vector<VertexId> expect;
  for (LocalId l = 0; l < 3; ++l) {
    if (should_send<double>(drift.row(l), first.row(l), 0.1)) expect.push_back(l);
  }
  ASSERT_EQ(sent.size(), expect.size());
  for (std::size_t i = 0; i < sent.size(); ++i) EXPECT_EQ(sent[i].vertex, expect[i]);
  // Snapshots advanced only for senders.
  EXPECT_EQ(mirror.local_snapshot(0)[0], 1.0);
  EXPECT_EQ(mirror.local_snapshot(1)[1], 2.5);
  // At eps 0 the suppressed drift on vertex 0 goes out, nothing else.
  const auto exact = mirror.mirror_pass(drift, 0.0, kLossless);
  ASSERT_EQ(exact.size(), 1u);
  EXPECT_EQ(exact[0].vertex, 0u);
  EXPECT_TRUE(mirror.mirror_pass(drift, 0.0, kLossless).empty());
}

TEST(Cache, LargeThresholdSuppressesTinyDrift) {
  const auto plan = two_worker_plan();
  VertexCache<double> mirror(plan, 1, 1, true);
  mirror.mirror_pass(column({4, 0}), 0.3, kLossless);
  EXPECT_TRUE(mirror.mirror_pass(column({4.01, 0}), 0.3, kLossless).empty());
}

TEST(Cache, MasterWithoutTrafficStaysIdle) {
  const auto plan = two_worker_plan();
  VertexCache<double> master(plan, 0, 1, true);
  const auto values = column({0, 5});
  EXPECT_EQ(master.master_pass({}, values, 0.1, kLossless).size(), 1u);
  EXPECT_TRUE(master.master_pass({}, values, 0.1, kLossless).empty());
  EXPECT_EQ(master.aggregate(1)[0], 5.0);
  EXPECT_TRUE(master.scatter_pass({}, kLossless).empty());
}

TEST(Cache, LossyMirrorDeltaAddsToAggregate) {
  const auto plan = two_worker_plan();
  const PayloadCodec<double> lossy(true, 16);
  VertexCache<double> master(plan, 0, 1, true);
  VertexCache<double> mirror(plan, 1, 1, true);
  // Scalar payloads are constant vectors, hence exact under quantization.
  auto g1 = mirror.mirror_pass(column({0, 0}), 0.0, lossy);
  EXPECT_TRUE(g1.empty());
  master.master_pass({}, column({0, 5}), 0.0, lossy);
  EXPECT_EQ(master.aggregate(1)[0], 5.0);
  auto g2 = mirror.mirror_pass(column({1, 0}), 0.0, lossy);
  ASSERT_EQ(g2.size(), 1u);
  EXPECT_EQ(lossy.decode(g2[0].payload), (std::vector<double>{1.0}));
  EXPECT_EQ(master.master_pass(g2, column({0, 5}), 0.0, lossy), (std::vector<LocalId>{1}));
  EXPECT_EQ(master.aggregate(1)[0], 6.0);
}

TEST(Cache, LossySnapshotsAgreeAcrossEnds) {
  const auto plan = two_worker_plan();
  const PayloadCodec<double> lossy(true, 4);
  VertexCache<double> master(plan, 0, 4, true);
  VertexCache<double> mirror(plan, 1, 4, true);
  Rng rng(9);
  for (int e = 0; e < 20; ++e) {
    const auto vm = testing_support::random_matrix(rng, 2, 4);
    const auto vs = testing_support::random_matrix(rng, 2, 4);
    const auto up = mirror.mirror_pass(vm, 0.01, lossy);
    const auto active = master.master_pass(up, vs, 0.01, lossy);
    mirror.apply_scatter(master.scatter_pass(active, lossy), lossy);
    const auto a = master.published(1);
    const auto b = mirror.published(0);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
}

TEST(Cache, ProtocolViolations) {
  const auto plan = two_worker_plan();
  VertexCache<double> master(plan, 0, 1, false);
  VertexCache<double> mirror(plan, 1, 1, false);
  const auto vals0 = column({0, 1});
  const auto vals1 = column({1, 0});

  // Message for a vertex with no replicated copy here.
  std::vector<VertexMessage<double>> stray{{1, 0, 0, std::vector<double>{1.0}}};
  EXPECT_THROW(master.master_pass(stray, vals0, 0.0, kLossless), ProtocolError);
  // Missing mirror message in cache-off mode.
  EXPECT_THROW(master.master_pass({}, vals0, 0.0, kLossless), ProtocolError);
  // Duplicate.
  auto up = mirror.mirror_pass(vals1, 0.0, kLossless);
  std::vector<VertexMessage<double>> dup{up[0], up[0]};
  EXPECT_THROW(master.master_pass(dup, vals0, 0.0, kLossless), ProtocolError);
  // Wrong destination.
  auto misrouted = up;
  misrouted[0].dest = 1;
  EXPECT_THROW(master.master_pass(misrouted, vals0, 0.0, kLossless), ProtocolError);
  // Scatter from a non-master and scatter onto the master.
  std::vector<VertexMessage<double>> fake{{0, 1, 1, std::vector<double>{2.0}}};
  fake[0].source = 1;
  fake[0].dest = 1;
  EXPECT_THROW(mirror.apply_scatter(fake, kLossless), ProtocolError);
  EXPECT_THROW(mirror.apply_scatter({}, kLossless), ProtocolError);
  std::vector<LocalId> not_master{0};
  EXPECT_THROW(mirror.scatter_pass(not_master, kLossless), ProtocolError);
}

// Raising eps can only shrink the set of vertices a mirror sends.
TEST(Cache, SendsMonotoneInThreshold) {
  static const Graph g = gen_power_law(200, 3, 21);
  const auto plan = partition(g, {1, 2}).plan;
  Rng rng(21);
  const auto base = testing_support::random_matrix(rng, plan.workers[1].num_local(), 3);
  auto drift = base;
  for (auto& x : drift.values()) x += rng.uniform(-0.2, 0.2);
  std::size_t previous = SIZE_MAX;
  for (double eps : {0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 1.0}) {
    VertexCache<double> mirror(plan, 1, 3, true);
    mirror.mirror_pass(base, eps, kLossless);
    const std::size_t n = mirror.mirror_pass(drift, eps, kLossless).size();
    EXPECT_LE(n, previous);
    previous = n;
  }
}
