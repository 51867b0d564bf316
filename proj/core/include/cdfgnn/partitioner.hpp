#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cdfgnn/graph_store.hpp"

namespace cdfgnn {

using WorkerId = std::uint32_t;
using LocalId = std::uint32_t;

inline constexpr WorkerId kNoWorker = std::numeric_limits<WorkerId>::max();

/// Hosts x workers-per-host. Worker i lives on host i / gpus_per_host.
struct ClusterShape {
  std::uint32_t num_hosts = 1;
  std::uint32_t gpus_per_host = 1;

  std::uint32_t num_workers() const noexcept { return num_hosts * gpus_per_host; }
  std::uint32_t host_of(WorkerId worker) const noexcept { return worker / gpus_per_host; }
  void validate() const;

  friend bool operator==(const ClusterShape&, const ClusterShape&) = default;
};

/// Streaming counters of the greedy vertex-cut. d_rep/h_rep hold worker and
/// host IDs in first-assignment order, so d_rep[u].front() is u's master.
struct PartitionerState {
  std::vector<std::vector<WorkerId>> d_rep;
  std::vector<std::vector<std::uint32_t>> h_rep;
  std::vector<std::size_t> e_count;
  std::vector<std::size_t> v_count;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 0.1;

  PartitionerState() = default;
  PartitionerState(std::size_t num_vertices, std::uint32_t num_workers, double alpha, double beta,
                   double gamma);

  bool on_worker(VertexId v, WorkerId w) const;
  bool on_host(VertexId v, std::uint32_t host) const;
  /// Records edge (u, v) on worker w and updates every counter.
  void assign(VertexId u, VertexId v, WorkerId w, const ClusterShape& cluster);
};

struct PartitionOptions {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 0.1;
  /// When set, edges are streamed in a seeded shuffle of the input order.
  std::optional<std::uint64_t> edge_order_seed;
};

/// Hierarchical edge-placement score of putting (u, v) on worker i; the
/// greedy pass picks the lowest.
double eva(VertexId u, VertexId v, WorkerId i, const PartitionerState& state, const ClusterShape& cluster,
           std::size_t total_edges, std::size_t total_vertices);

struct LocalEdge {
  LocalId a = 0;
  LocalId b = 0;
  friend bool operator==(const LocalEdge&, const LocalEdge&) = default;
};

/// One worker's subgraph. Local IDs are contiguous from 0 and ascend with the
/// global ID, so ascending-local accumulation equals ascending-global.
struct WorkerPartition {
  std::vector<VertexId> local_to_global;
  std::vector<std::uint8_t> is_master;
  std::vector<LocalEdge> edges;

  std::size_t num_local() const noexcept { return local_to_global.size(); }
  std::optional<LocalId> local_of(VertexId global) const;

  friend bool operator==(const WorkerPartition&, const WorkerPartition&) = default;
};

/// Edge assignment plus master/mirror maps for every worker.
struct PartitionPlan {
  ClusterShape cluster;
  std::size_t num_vertices = 0;
  std::size_t num_edges = 0;
  std::vector<WorkerPartition> workers;
  /// Master worker per global vertex.
  std::vector<WorkerId> master_of;
  /// All workers holding a replica, ascending.
  std::vector<std::vector<WorkerId>> replicas;

  std::span<const WorkerId> replicas_of(VertexId v) const { return replicas[v]; }
  bool is_replicated(VertexId v) const { return replicas[v].size() > 1; }

  /// Rebuilds master_of/replicas from the per-worker tables.
  void rebuild_vertex_maps();
  /// Throws IntegrityError naming the first broken invariant.
  void validate() const;

  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

struct PartitionResult {
  PartitionPlan plan;
  PartitionerState state;
};

/// Greedy streaming vertex-cut. Ties go to the lowest worker ID; a vertex's
/// master is the first worker it lands on. Vertices without edges are placed
/// as lone masters on worker (v mod p).
PartitionResult partition(const Graph& graph, const ClusterShape& cluster, const PartitionOptions& options = {});

/// Builds a plan from an explicit per-edge worker assignment (edges in
/// graph order). Used by fixtures and the brute-force reference.
PartitionPlan plan_from_assignment(const Graph& graph, const ClusterShape& cluster,
                                   std::span<const Edge> edge_order, std::span<const WorkerId> assignment);

struct PartitionStats {
  double replication_factor = 1.0;
  double edge_imbalance = 1.0;
  double vertex_imbalance = 1.0;
  std::size_t inner_max = 0;
  std::size_t outer_max = 0;
  /// Per-worker endpoints of one gather+scatter round, by peer locality.
  std::vector<std::size_t> inner_per_worker;
  std::vector<std::size_t> outer_per_worker;
};

PartitionStats compute_stats(const PartitionPlan& plan);

inline constexpr int kPlanFormatVersion = 1;

/// Directory layout: manifest.json, worker_<i>.edges, worker_<i>.map.
void write_plan(const PartitionPlan& plan, const std::filesystem::path& dir);
PartitionPlan load_plan(const std::filesystem::path& dir);

}  // namespace cdfgnn
