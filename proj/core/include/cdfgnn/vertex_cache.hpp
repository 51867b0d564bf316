#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cdfgnn/partitioner.hpp"
#include "cdfgnn/quant_codec.hpp"
#include "cdfgnn/tensor_math.hpp"

namespace cdfgnn {

/// True iff ||current - snapshot||_inf > eps * ||snapshot||_inf.
template <typename T>
bool should_send(std::span<const T> current, std::span<const T> snapshot, double eps);

struct EpsilonConfig {
  double eps_init = 0.01;
  double mu1 = 0.001;
  double mu2 = 0.02;
  double nu1 = 0.3;
  double nu2 = 0.001;
  double xi = 0.01;
  double lambda1 = 1.05;
  double lambda2 = 0.9;
  /// When false, eps stays at eps_init for the whole run.
  bool adaptive = true;
};

/// Per-epoch threshold rule driven by global training accuracy.
class EpsilonController {
 public:
  EpsilonController() = default;
  explicit EpsilonController(const EpsilonConfig& config);

  double eps() const noexcept { return eps_; }
  double mean_acc() const noexcept { return mean_acc_; }
  bool primed() const noexcept { return primed_; }
  const EpsilonConfig& config() const noexcept { return config_; }

  /// Applies the loosen/tighten rule against the running mean, then folds
  /// acc into the mean. The first call only records acc as the mean. A step
  /// never leaves [nu2, nu1].
  double update(double acc);

 private:
  EpsilonConfig config_;
  double eps_ = 0.01;
  double mean_acc_ = 0.0;
  bool primed_ = false;
};

enum class ScatterEncoding : std::uint8_t { kDelta, kFull };

/// One vertex payload travelling between replicas.
template <typename T>
struct VertexMessage {
  WorkerId source = 0;
  WorkerId dest = 0;
  VertexId vertex = 0;
  Payload<T> payload;
};

/// Replica-synchronization state of one worker for one (layer, direction).
///
/// Only replicated vertices take part. With `cached == false` every replica
/// sends every epoch and the master sums fresh values; with `cached == true`
/// the adaptive protocol decides per vertex. In both modes the master
/// aggregate is summed over mirrors in ascending worker order and then the
/// master's own value, so an all-sending cached epoch equals the uncached
/// one.
///
/// With a lossless codec a message carries the replica's value (the same
/// size as its difference), which keeps every snapshot exact. With a lossy
/// codec it carries the quantized difference and both ends advance their
/// snapshot by the decoded difference so they never diverge.
template <typename T>
class VertexCache {
 public:
  VertexCache() = default;
  VertexCache(const PartitionPlan& plan, WorkerId self, std::size_t dim, bool cached,
              ScatterEncoding scatter = ScatterEncoding::kDelta);

  std::size_t dim() const noexcept { return dim_; }
  bool cached() const noexcept { return cached_; }
  WorkerId self() const noexcept { return self_; }

  /// Gather phase on mirrors. Returns one message per sending mirror vertex.
  std::vector<VertexMessage<T>> mirror_pass(const DenseMatrix<T>& current, double eps, const PayloadCodec<T>& codec);

  /// Gather phase on masters, after the barrier. Consumes mirror messages
  /// (any order) and the master's own values; returns the local IDs of
  /// active vertices in ascending order. Throws ProtocolError for a message
  /// that does not name a mirror of a vertex mastered here.
  std::vector<LocalId> master_pass(std::span<const VertexMessage<T>> received, const DenseMatrix<T>& current,
                                   double eps, const PayloadCodec<T>& codec);

  /// Scatter phase on masters: one message per (active vertex, mirror).
  std::vector<VertexMessage<T>> scatter_pass(std::span<const LocalId> active, const PayloadCodec<T>& codec);

  /// Scatter phase on mirrors. Throws ProtocolError for a payload that does
  /// not come from the vertex's master.
  void apply_scatter(std::span<const VertexMessage<T>> received, const PayloadCodec<T>& codec);

  /// Synced values: the published aggregate for replicated vertices and the
  /// local value for the rest.
  DenseMatrix<T> synced(const DenseMatrix<T>& current) const;

  /// Local snapshot of local vertex l (zero until first sent).
  std::span<const T> local_snapshot(LocalId l) const;
  /// Aggregate as last published to every replica.
  std::span<const T> published(LocalId l) const;
  /// Master's exact aggregate of the replica snapshots.
  std::span<const T> aggregate(LocalId l) const;

  std::size_t replicated_count() const noexcept { return slots_.size(); }

 private:
  struct Slot {
    LocalId local = 0;
    VertexId global = 0;
    WorkerId master = 0;
    bool is_master = false;
    /// Masters only: mirror workers ascending, with one snapshot each.
    std::vector<WorkerId> mirrors;
    std::vector<std::vector<T>> mirror_snapshots;
    std::vector<T> local_snapshot;
    std::vector<T> published;
    std::vector<T> aggregate;
  };

  Slot& slot_for(VertexId global, const char* phase);
  void recompute_aggregate(Slot& s);

  const PartitionPlan* plan_ = nullptr;
  WorkerId self_ = 0;
  std::size_t dim_ = 0;
  bool cached_ = false;
  ScatterEncoding scatter_ = ScatterEncoding::kDelta;
  std::vector<Slot> slots_;
  /// Slot index per local ID; npos for vertices with a single replica.
  std::vector<std::size_t> slot_of_;
};

}  // namespace cdfgnn
