#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdfgnn/gcn_engine.hpp"
#include "cdfgnn/graph_store.hpp"
#include "cdfgnn/partitioner.hpp"
#include "cdfgnn/quant_codec.hpp"
#include "cdfgnn/vertex_cache.hpp"

namespace cdfgnn {

enum class MessageKind : std::uint8_t { kGatherDelta, kScatterDelta, kParamGrad, kParamSum, kAccuracyReport };
enum class Direction : std::uint8_t { kForward, kBackward };

const char* to_string(MessageKind kind);
const char* to_string(Direction dir);

/// Everything that crosses a worker boundary. Vertex kinds carry `payload`;
/// parameter and report kinds carry `scalars`.
template <typename T>
struct SyncMessage {
  MessageKind kind = MessageKind::kGatherDelta;
  std::uint64_t epoch = 0;
  std::uint32_t layer = 0;
  Direction direction = Direction::kForward;
  WorkerId source = 0;
  WorkerId dest = 0;
  VertexId vertex = 0;
  Payload<T> payload;
  std::vector<double> scalars;
};

/// Hierarchical link model used for reporting modeled communication time.
struct CostModel {
  double inner_bandwidth = 22.70e9;
  double outer_bandwidth = 8.27e9;
  double inner_latency = 2e-6;
  double outer_latency = 5e-6;

  void validate() const;
};

/// Traffic sent by one worker, split by whether the peer shares its host.
struct CommCounters {
  std::uint64_t inner_bytes = 0;
  std::uint64_t outer_bytes = 0;
  std::uint64_t inner_messages = 0;
  std::uint64_t outer_messages = 0;

  CommCounters& operator+=(const CommCounters& o);
};

/// bytes/bandwidth + latency * messages, per link class.
double model_comm_time(const CommCounters& sent, const CostModel& cost);

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  double eps = 0.0;
  /// Vertex messages (gather plus scatter) per layer, layer 1 first.
  std::vector<std::uint64_t> fwd_sends;
  std::vector<std::uint64_t> bwd_sends;
  std::uint64_t inner_bytes = 0;
  std::uint64_t outer_bytes = 0;
  std::uint64_t vertex_messages = 0;
  /// Max over workers of the modeled time of what each worker sent.
  double modeled_comm_s = 0.0;
  std::vector<double> modeled_comm_per_worker;
  double wall_s = 0.0;

  std::uint64_t total_sends() const;
};

/// Mutex-guarded inbox of one worker.
template <typename T>
class Mailbox {
 public:
  void deposit(std::vector<SyncMessage<T>> batch);
  /// Removes and returns every message matching the tag, ordered by source
  /// worker and then by deposit order.
  std::vector<SyncMessage<T>> take(MessageKind kind, std::uint64_t epoch, std::uint32_t layer, Direction dir);
  std::size_t pending() const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::vector<SyncMessage<T>> messages_;
};

/// Reusable barrier with a deadline and an abort switch. A timeout or an
/// abort throws ProtocolError in every waiting thread.
class PhaseBarrier {
 public:
  PhaseBarrier(std::size_t parties, std::chrono::milliseconds timeout);

  void arrive_and_wait(const std::string& phase);
  void abort(const std::string& reason);
  bool aborted() const;

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t parties_;
  std::chrono::milliseconds timeout_;
  std::size_t waiting_ = 0;
  std::uint64_t generation_ = 0;
  bool aborted_ = false;
  std::string reason_;
};

struct RuntimeConfig {
  std::size_t hidden_dim = 64;
  std::size_t num_layers = 2;
  std::uint64_t weight_seed = 1;
  OptimizerConfig optimizer;
  bool cache_enabled = false;
  EpsilonConfig epsilon;
  ScatterEncoding scatter = ScatterEncoding::kDelta;
  bool quant_enabled = false;
  int quant_bits = 8;
  /// Reduce and apply each layer's gradient inside the backward loop.
  bool update_per_layer = false;
  /// Random per-worker delays and send order, for scheduling tests.
  std::optional<std::uint64_t> jitter_seed;
  std::chrono::milliseconds barrier_timeout{60000};
  CostModel cost;
  bool record_wall = false;
};

/// p simulated workers running full-batch GCN epochs in lockstep.
template <typename T>
class Runtime {
 public:
  Runtime(const Graph& graph, const FeatureMatrix& features, const LabelSet& labels, const PartitionPlan& plan,
          const RuntimeConfig& config);
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// One iteration on every worker. Throws ProtocolError (with worker and
  /// phase context) if the message protocol breaks or a barrier times out.
  EpochMetrics run_epoch();

  std::size_t epochs_run() const noexcept { return epoch_; }
  std::size_t num_workers() const noexcept;
  const ModelParams<T>& params(WorkerId worker = 0) const;
  /// True if every worker holds bitwise-identical parameters.
  bool params_coherent() const;
  /// Summed ∇W broadcast by the parameter server in the last epoch.
  const std::vector<DenseMatrix<T>>& last_summed_grads() const noexcept { return last_grads_; }
  /// Synced values of the last epoch assembled per global vertex from the
  /// vertex's master (layer index is 0-based).
  DenseMatrix<T> assembled_z(std::size_t layer) const;
  DenseMatrix<T> assembled_delta(std::size_t layer) const;
  /// Upper bound of vertex messages per layer and direction: 2 * sum(r-1).
  std::uint64_t max_sends_per_sync() const noexcept { return max_sends_; }
  double eps() const;
  const RuntimeConfig& config() const noexcept { return config_; }
  const PartitionPlan& plan() const noexcept { return plan_; }

  /// Tampering hook for protocol tests: extra messages delivered to a
  /// worker at the start of the next epoch.
  void inject_for_test(WorkerId dest, SyncMessage<T> message);

 private:
  struct Worker;

  void worker_epoch(Worker& w, std::uint64_t epoch);
  DenseMatrix<T> sync(Worker& w, std::uint64_t epoch, std::uint32_t layer, Direction dir,
                      const DenseMatrix<T>& local);
  std::vector<DenseMatrix<T>> reduce_params(Worker& w, std::uint64_t epoch, std::uint32_t first_layer,
                                            std::span<const DenseMatrix<T>> grads);
  void send(Worker& w, std::vector<SyncMessage<T>> batch);
  void jitter(Worker& w);
  std::string phase_name(const char* what, std::uint64_t epoch, std::uint32_t layer, Direction dir) const;

  PartitionPlan plan_;
  RuntimeConfig config_;
  PayloadCodec<T> codec_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::vector<std::unique_ptr<Mailbox<T>>> mailboxes_;
  std::unique_ptr<PhaseBarrier> barrier_;
  std::vector<std::size_t> dims_;
  std::size_t total_train_ = 0;
  std::size_t num_vertices_ = 0;
  std::uint64_t max_sends_ = 0;
  std::size_t epoch_ = 0;
  std::vector<DenseMatrix<T>> last_grads_;
  std::vector<SyncMessage<T>> injected_;
  std::vector<WorkerId> injected_dest_;
};

extern template class Runtime<float>;
extern template class Runtime<double>;

}  // namespace cdfgnn
