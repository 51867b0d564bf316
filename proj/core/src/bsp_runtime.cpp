#include "cdfgnn/bsp_runtime.hpp"

#include <algorithm>
#include <array>
#include <exception>
#include <numeric>
#include <thread>

#include "cdfgnn/error.hpp"
#include "cdfgnn/random.hpp"

namespace cdfgnn {

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

// Report tags: layer 0 carries per-worker counts up to rank 0, layer 1
// carries the reduced totals back down.
constexpr std::uint32_t kReportUp = 0;
constexpr std::uint32_t kReportDown = 1;

// loss_sum, train correct/total, val correct/total, test correct/total.
constexpr std::size_t kReportFields = 7;

}  // namespace

const char* to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::kGatherDelta: return "gather";
    case MessageKind::kScatterDelta: return "scatter";
    case MessageKind::kParamGrad: return "param_grad";
    case MessageKind::kParamSum: return "param_sum";
    case MessageKind::kAccuracyReport: return "accuracy_report";
  }
  return "unknown";
}

const char* to_string(Direction dir) { return dir == Direction::kForward ? "forward" : "backward"; }

void CostModel::validate() const {
  if (!(inner_bandwidth > 0.0) || !(outer_bandwidth > 0.0)) throw ArgumentError("cost model: bandwidth must be positive");
  if (inner_latency < 0.0 || outer_latency < 0.0) throw ArgumentError("cost model: latency must be non-negative");
}

CommCounters& CommCounters::operator+=(const CommCounters& o) {
  inner_bytes += o.inner_bytes;
  outer_bytes += o.outer_bytes;
  inner_messages += o.inner_messages;
  outer_messages += o.outer_messages;
  return *this;
}

double model_comm_time(const CommCounters& sent, const CostModel& cost) {
  return static_cast<double>(sent.inner_bytes) / cost.inner_bandwidth +
         static_cast<double>(sent.outer_bytes) / cost.outer_bandwidth +
         cost.inner_latency * static_cast<double>(sent.inner_messages) +
         cost.outer_latency * static_cast<double>(sent.outer_messages);
}

std::uint64_t EpochMetrics::total_sends() const {
  return std::accumulate(fwd_sends.begin(), fwd_sends.end(), std::uint64_t{0}) +
         std::accumulate(bwd_sends.begin(), bwd_sends.end(), std::uint64_t{0});
}

// ---- Mailbox ---------------------------------------------------------------

template <typename T>
void Mailbox<T>::deposit(std::vector<SyncMessage<T>> batch) {
  std::lock_guard lock(mutex_);
  for (auto& m : batch) messages_.push_back(std::move(m));
}

template <typename T>
std::vector<SyncMessage<T>> Mailbox<T>::take(MessageKind kind, std::uint64_t epoch, std::uint32_t layer,
                                             Direction dir) {
  std::vector<SyncMessage<T>> out;
  {
    std::lock_guard lock(mutex_);
    auto keep = messages_.begin();
    for (auto it = messages_.begin(); it != messages_.end(); ++it) {
      if (it->kind == kind && it->epoch == epoch && it->layer == layer && it->direction == dir) {
        out.push_back(std::move(*it));
      } else {
        if (keep != it) *keep = std::move(*it);
        ++keep;
      }
    }
    messages_.erase(keep, messages_.end());
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.source < b.source; });
  return out;
}

template <typename T>
std::size_t Mailbox<T>::pending() const {
  std::lock_guard lock(mutex_);
  return messages_.size();
}

template <typename T>
void Mailbox<T>::clear() {
  std::lock_guard lock(mutex_);
  messages_.clear();
}

// ---- PhaseBarrier ----------------------------------------------------------

PhaseBarrier::PhaseBarrier(std::size_t parties, std::chrono::milliseconds timeout)
    : parties_(parties), timeout_(timeout) {
  if (parties == 0) throw ArgumentError("barrier needs at least one party");
}

void PhaseBarrier::arrive_and_wait(const std::string& phase) {
  std::unique_lock lock(mutex_);
  if (aborted_) throw ProtocolError("barrier aborted before " + phase + ": " + reason_);
  const std::uint64_t gen = generation_;
  if (++waiting_ == parties_) {
    waiting_ = 0;
    ++generation_;
    cv_.notify_all();
    return;
  }
  const bool released =
      cv_.wait_for(lock, timeout_, [&] { return generation_ != gen || aborted_; });
  if (aborted_) throw ProtocolError("barrier aborted at " + phase + ": " + reason_);
  if (!released) {
    aborted_ = true;
    reason_ = "timeout at " + phase;
    cv_.notify_all();
    throw ProtocolError("barrier timeout at " + phase + " (" + std::to_string(waiting_) + " of " +
                        std::to_string(parties_) + " arrived)");
  }
}

void PhaseBarrier::abort(const std::string& reason) {
  std::lock_guard lock(mutex_);
  if (!aborted_) {
    aborted_ = true;
    reason_ = reason;
  }
  cv_.notify_all();
}

bool PhaseBarrier::aborted() const {
  std::lock_guard lock(mutex_);
  return aborted_;
}

// ---- Runtime ---------------------------------------------------------------

template <typename T>
struct Runtime<T>::Worker {
  WorkerId id = 0;
  std::uint32_t host = 0;
  CsrMatrix<T> adj;
  DenseMatrix<T> features;
  std::vector<std::uint32_t> labels;
  std::vector<VertexRole> roles;
  std::vector<std::uint8_t> is_master;
  ModelParams<T> params;
  Optimizer<T> optimizer;
  EpsilonController controller;
  std::vector<VertexCache<T>> fwd_cache;
  std::vector<VertexCache<T>> bwd_cache;
  LayerState<T> state;
  Rng jitter_rng{0};
  double eps_now = 0.0;

  // Results of the current epoch, read by the coordinator after join.
  CommCounters sent;
  std::vector<std::uint64_t> fwd_sends;
  std::vector<std::uint64_t> bwd_sends;
  std::array<double, kReportFields> totals{};
  std::vector<DenseMatrix<T>> summed;
};

template <typename T>
Runtime<T>::Runtime(const Graph& graph, const FeatureMatrix& features, const LabelSet& labels,
                    const PartitionPlan& plan, const RuntimeConfig& config)
    : plan_(plan), config_(config) {
  plan_.validate();
  config_.cost.validate();
  if (plan_.num_vertices != graph.num_vertices() || plan_.num_edges != graph.num_edges()) {
    throw IntegrityError("plan does not match graph: vertex or edge count differs");
  }
  if (features.rows() != graph.num_vertices()) throw ShapeError("feature rows do not match vertex count");
  labels.validate(graph.num_vertices());
  if (labels.num_classes == 0) throw ArgumentError("label set declares no classes");
  codec_ = PayloadCodec<T>(config_.quant_enabled, config_.quant_bits);
  dims_ = layer_dims(features.dim(), config_.hidden_dim, labels.num_classes, config_.num_layers);
  total_train_ = std::max<std::size_t>(1, labels.count(VertexRole::kTrain));
  num_vertices_ = graph.num_vertices();

  std::vector<std::uint32_t> endpoint_count(graph.num_vertices(), 0);
  for (const auto& wp : plan_.workers) {
    for (const auto& e : wp.edges) {
      ++endpoint_count[wp.local_to_global[e.a]];
      ++endpoint_count[wp.local_to_global[e.b]];
    }
  }
  for (VertexId v = 0; v < graph.num_vertices(); ++v) {
    if (endpoint_count[v] != graph.degree(v)) {
      throw IntegrityError("plan does not match graph: degree of vertex " + std::to_string(v) + " differs");
    }
  }
  for (VertexId v = 0; v < plan_.num_vertices; ++v) max_sends_ += 2 * (plan_.replicas[v].size() - 1);

  const auto base = ModelParams<T>::glorot(dims_, config_.weight_seed);
  const auto dense = cast_matrix<T>(features.values);
  const std::uint32_t p = plan_.cluster.num_workers();
  for (WorkerId i = 0; i < p; ++i) {
    const auto& wp = plan_.workers[i];
    auto w = std::make_unique<Worker>();
    w->id = i;
    w->host = plan_.cluster.host_of(i);
    const std::size_t n = wp.num_local();

    std::vector<std::vector<std::pair<LocalId, T>>> rows(n);
    for (const auto& e : wp.edges) {
      const T weight = normalized_weight<T>(graph.degree(wp.local_to_global[e.a]), graph.degree(wp.local_to_global[e.b]));
      rows[e.a].push_back({e.b, weight});
      rows[e.b].push_back({e.a, weight});
    }
    w->adj.rows = n;
    w->adj.cols = n;
    for (auto& r : rows) {
      std::sort(r.begin(), r.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      for (const auto& [c, val] : r) {
        w->adj.col_idx.push_back(c);
        w->adj.values.push_back(val);
      }
      w->adj.row_ptr.push_back(w->adj.col_idx.size());
    }
    w->adj.validate();

    w->features = DenseMatrix<T>(n, features.dim());
    w->labels.resize(n);
    w->roles.resize(n);
    for (LocalId l = 0; l < n; ++l) {
      const VertexId g = wp.local_to_global[l];
      std::copy(dense.row(g).begin(), dense.row(g).end(), w->features.row(l).begin());
      w->labels[l] = labels.labels[g];
      w->roles[l] = labels.roles[g];
    }
    w->is_master = wp.is_master;
    w->params = base;
    w->optimizer = Optimizer<T>(config_.optimizer, w->params);
    w->controller = EpsilonController(config_.epsilon);
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
      w->fwd_cache.emplace_back(plan_, i, dims_[l + 1], config_.cache_enabled, config_.scatter);
      w->bwd_cache.emplace_back(plan_, i, dims_[l + 1], config_.cache_enabled, config_.scatter);
    }
    if (config_.jitter_seed) w->jitter_rng = Rng(*config_.jitter_seed * 1000003ull + i);
    workers_.push_back(std::move(w));
    mailboxes_.push_back(std::make_unique<Mailbox<T>>());
  }
}

template <typename T>
Runtime<T>::~Runtime() = default;

template <typename T>
std::size_t Runtime<T>::num_workers() const noexcept {
  return workers_.size();
}

template <typename T>
const ModelParams<T>& Runtime<T>::params(WorkerId worker) const {
  if (worker >= workers_.size()) throw ArgumentError("params: no worker " + std::to_string(worker));
  return workers_[worker]->params;
}

template <typename T>
bool Runtime<T>::params_coherent() const {
  for (const auto& w : workers_) {
    if (!(w->params == workers_.front()->params)) return false;
  }
  return true;
}

template <typename T>
double Runtime<T>::eps() const {
  return workers_.front()->controller.eps();
}

template <typename T>
void Runtime<T>::inject_for_test(WorkerId dest, SyncMessage<T> message) {
  if (dest >= workers_.size()) throw ArgumentError("inject_for_test: no worker " + std::to_string(dest));
  injected_.push_back(std::move(message));
  injected_dest_.push_back(dest);
}

template <typename T>
DenseMatrix<T> Runtime<T>::assembled_z(std::size_t layer) const {
  if (layer >= config_.num_layers) throw ArgumentError("assembled_z: layer out of range");
  DenseMatrix<T> out(num_vertices_, dims_[layer + 1]);
  for (VertexId v = 0; v < num_vertices_; ++v) {
    const Worker& w = *workers_[plan_.master_of[v]];
    const auto row = w.state.z_synced[layer].row(*plan_.workers[w.id].local_of(v));
    std::copy(row.begin(), row.end(), out.row(v).begin());
  }
  return out;
}

template <typename T>
DenseMatrix<T> Runtime<T>::assembled_delta(std::size_t layer) const {
  if (layer >= config_.num_layers) throw ArgumentError("assembled_delta: layer out of range");
  DenseMatrix<T> out(num_vertices_, dims_[layer + 1]);
  for (VertexId v = 0; v < num_vertices_; ++v) {
    const Worker& w = *workers_[plan_.master_of[v]];
    const auto row = w.state.delta_synced[layer].row(*plan_.workers[w.id].local_of(v));
    std::copy(row.begin(), row.end(), out.row(v).begin());
  }
  return out;
}

template <typename T>
std::string Runtime<T>::phase_name(const char* what, std::uint64_t epoch, std::uint32_t layer, Direction dir) const {
  return std::string(what) + " (epoch " + std::to_string(epoch + 1) + ", layer " + std::to_string(layer + 1) + ", " +
         to_string(dir) + ")";
}

template <typename T>
void Runtime<T>::jitter(Worker& w) {
  if (!config_.jitter_seed) return;
  std::this_thread::sleep_for(std::chrono::microseconds(w.jitter_rng.uniform_index(300)));
}

template <typename T>
void Runtime<T>::send(Worker& w, std::vector<SyncMessage<T>> batch) {
  if (config_.jitter_seed) {
    jitter(w);
    w.jitter_rng.shuffle(batch);
  }
  std::vector<std::vector<SyncMessage<T>>> by_dest(workers_.size());
  for (auto& m : batch) {
    if (m.dest >= workers_.size()) throw ProtocolError("send: no worker " + std::to_string(m.dest));
    if (m.dest != m.source) {
      std::uint64_t bytes = 0;
      switch (m.kind) {
        case MessageKind::kGatherDelta:
        case MessageKind::kScatterDelta:
          bytes = (codec_.size_bits(m.payload) + 7) / 8;
          break;
        case MessageKind::kParamGrad:
        case MessageKind::kParamSum:
          bytes = std::get<std::vector<T>>(m.payload).size() * sizeof(T);
          break;
        case MessageKind::kAccuracyReport:
          bytes = m.scalars.size() * sizeof(double);
          break;
      }
      if (plan_.cluster.host_of(m.dest) == w.host) {
        w.sent.inner_bytes += bytes;
        ++w.sent.inner_messages;
      } else {
        w.sent.outer_bytes += bytes;
        ++w.sent.outer_messages;
      }
    }
    by_dest[m.dest].push_back(std::move(m));
  }
  for (WorkerId d = 0; d < by_dest.size(); ++d) {
    if (!by_dest[d].empty()) mailboxes_[d]->deposit(std::move(by_dest[d]));
  }
}

template <typename T>
DenseMatrix<T> Runtime<T>::sync(Worker& w, std::uint64_t epoch, std::uint32_t layer, Direction dir,
                                const DenseMatrix<T>& local) {
  auto& cache = (dir == Direction::kForward ? w.fwd_cache : w.bwd_cache)[layer];
  auto& sends = dir == Direction::kForward ? w.fwd_sends : w.bwd_sends;

  auto wrap = [&](std::vector<VertexMessage<T>> vms, MessageKind kind) {
    std::vector<SyncMessage<T>> out;
    out.reserve(vms.size());
    for (auto& vm : vms) {
      SyncMessage<T> m;
      m.kind = kind;
      m.epoch = epoch;
      m.layer = layer;
      m.direction = dir;
      m.source = vm.source;
      m.dest = vm.dest;
      m.vertex = vm.vertex;
      m.payload = std::move(vm.payload);
      out.push_back(std::move(m));
    }
    return out;
  };
  auto unwrap = [](std::vector<SyncMessage<T>> ms) {
    std::vector<VertexMessage<T>> out;
    out.reserve(ms.size());
    for (auto& m : ms) out.push_back({m.source, m.dest, m.vertex, std::move(m.payload)});
    return out;
  };

  auto gather = cache.mirror_pass(local, w.eps_now, codec_);
  sends[layer] += gather.size();
  send(w, wrap(std::move(gather), MessageKind::kGatherDelta));
  barrier_->arrive_and_wait(phase_name("gather", epoch, layer, dir));

  const auto received = unwrap(mailboxes_[w.id]->take(MessageKind::kGatherDelta, epoch, layer, dir));
  const auto active = cache.master_pass(received, local, w.eps_now, codec_);
  barrier_->arrive_and_wait(phase_name("gather consumed", epoch, layer, dir));

  auto scatter = cache.scatter_pass(active, codec_);
  sends[layer] += scatter.size();
  send(w, wrap(std::move(scatter), MessageKind::kScatterDelta));
  barrier_->arrive_and_wait(phase_name("scatter", epoch, layer, dir));

  cache.apply_scatter(unwrap(mailboxes_[w.id]->take(MessageKind::kScatterDelta, epoch, layer, dir)), codec_);
  return cache.synced(local);
}

template <typename T>
std::vector<DenseMatrix<T>> Runtime<T>::reduce_params(Worker& w, std::uint64_t epoch, std::uint32_t first_layer,
                                                      std::span<const DenseMatrix<T>> grads) {
  const auto p = static_cast<WorkerId>(workers_.size());
  std::vector<SyncMessage<T>> up;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    SyncMessage<T> m;
    m.kind = MessageKind::kParamGrad;
    m.epoch = epoch;
    m.layer = first_layer + static_cast<std::uint32_t>(k);
    m.direction = Direction::kBackward;
    m.source = w.id;
    m.dest = 0;
    m.payload = std::vector<T>(grads[k].values().begin(), grads[k].values().end());
    up.push_back(std::move(m));
  }
  send(w, std::move(up));
  barrier_->arrive_and_wait(phase_name("param reduce", epoch, first_layer, Direction::kBackward));

  if (w.id == 0) {
    std::vector<SyncMessage<T>> down;
    for (std::size_t k = 0; k < grads.size(); ++k) {
      const auto layer = first_layer + static_cast<std::uint32_t>(k);
      auto parts = mailboxes_[0]->take(MessageKind::kParamGrad, epoch, layer, Direction::kBackward);
      if (parts.size() != p) {
        throw ProtocolError("param reduce: " + std::to_string(parts.size()) + " of " + std::to_string(p) +
                            " contributions for layer " + std::to_string(layer + 1));
      }
      for (WorkerId i = 0; i < p; ++i) {
        if (parts[i].source != i) throw ProtocolError("param reduce: duplicate or missing contribution");
      }
      std::vector<T> total = std::get<std::vector<T>>(parts[0].payload);
      for (WorkerId i = 1; i < p; ++i) {
        const auto& part = std::get<std::vector<T>>(parts[i].payload);
        if (part.size() != total.size()) throw ProtocolError("param reduce: contribution shape mismatch");
        for (std::size_t j = 0; j < total.size(); ++j) total[j] += part[j];
      }
      for (WorkerId i = 0; i < p; ++i) {
        SyncMessage<T> m;
        m.kind = MessageKind::kParamSum;
        m.epoch = epoch;
        m.layer = layer;
        m.direction = Direction::kBackward;
        m.source = 0;
        m.dest = i;
        m.payload = total;
        down.push_back(std::move(m));
      }
    }
    send(w, std::move(down));
  }
  barrier_->arrive_and_wait(phase_name("param broadcast", epoch, first_layer, Direction::kBackward));

  std::vector<DenseMatrix<T>> out;
  for (std::size_t k = 0; k < grads.size(); ++k) {
    const auto layer = first_layer + static_cast<std::uint32_t>(k);
    auto msgs = mailboxes_[w.id]->take(MessageKind::kParamSum, epoch, layer, Direction::kBackward);
    if (msgs.size() != 1 || msgs[0].source != 0) {
      throw ProtocolError("param broadcast: expected one summed gradient for layer " + std::to_string(layer + 1));
    }
    out.emplace_back(grads[k].rows(), grads[k].cols(), std::move(std::get<std::vector<T>>(msgs[0].payload)));
  }
  return out;
}

template <typename T>
void Runtime<T>::worker_epoch(Worker& w, std::uint64_t epoch) {
  const std::size_t layers = config_.num_layers;
  const auto p = static_cast<WorkerId>(workers_.size());
  w.eps_now = config_.cache_enabled ? w.controller.eps() : 0.0;
  w.sent = {};
  w.fwd_sends.assign(layers, 0);
  w.bwd_sends.assign(layers, 0);
  w.summed.assign(layers, {});

  auto& st = w.state;
  st = LayerState<T>(layers);
  st.h[0] = w.features;
  for (std::uint32_t l = 0; l < layers; ++l) {
    st.z_local[l] = forward_local(st.h[l], w.params.weights[l], w.adj);
    st.z_synced[l] = sync(w, epoch, l, Direction::kForward, st.z_local[l]);
    st.h[l + 1] = activate(st.z_synced[l], l + 1 == layers);
  }

  LossResult<T> loss =
      loss_and_output_grad<T>(st.h[layers], w.labels, w.roles, w.is_master, static_cast<double>(total_train_));
  {
    SyncMessage<T> report;
    report.kind = MessageKind::kAccuracyReport;
    report.epoch = epoch;
    report.layer = kReportUp;
    report.source = w.id;
    report.dest = 0;
    report.scalars = {loss.loss_sum,
                      double(loss.train_correct),
                      double(loss.train_total),
                      double(loss.val_correct),
                      double(loss.val_total),
                      double(loss.test_correct),
                      double(loss.test_total)};
    std::vector<SyncMessage<T>> batch;
    batch.push_back(std::move(report));
    send(w, std::move(batch));
  }
  barrier_->arrive_and_wait("accuracy report (epoch " + std::to_string(epoch + 1) + ")");
  if (w.id == 0) {
    auto reports = mailboxes_[0]->take(MessageKind::kAccuracyReport, epoch, kReportUp, Direction::kForward);
    if (reports.size() != p) throw ProtocolError("accuracy report: missing worker reports");
    std::vector<double> totals(kReportFields, 0.0);
    for (WorkerId i = 0; i < p; ++i) {
      if (reports[i].source != i || reports[i].scalars.size() != kReportFields) {
        throw ProtocolError("accuracy report: malformed or duplicate report");
      }
      for (std::size_t f = 0; f < kReportFields; ++f) totals[f] += reports[i].scalars[f];
    }
    std::vector<SyncMessage<T>> down;
    for (WorkerId i = 0; i < p; ++i) {
      SyncMessage<T> m;
      m.kind = MessageKind::kAccuracyReport;
      m.epoch = epoch;
      m.layer = kReportDown;
      m.source = 0;
      m.dest = i;
      m.scalars = totals;
      down.push_back(std::move(m));
    }
    send(w, std::move(down));
  }
  barrier_->arrive_and_wait("accuracy broadcast (epoch " + std::to_string(epoch + 1) + ")");
  {
    auto msgs = mailboxes_[w.id]->take(MessageKind::kAccuracyReport, epoch, kReportDown, Direction::kForward);
    if (msgs.size() != 1 || msgs[0].scalars.size() != kReportFields) {
      throw ProtocolError("accuracy broadcast: expected one totals message");
    }
    std::copy(msgs[0].scalars.begin(), msgs[0].scalars.end(), w.totals.begin());
  }

  std::vector<DenseMatrix<T>> grads(layers);
  st.delta_local[layers - 1] = std::move(loss.grad);
  st.delta_synced[layers - 1] =
      sync(w, epoch, static_cast<std::uint32_t>(layers - 1), Direction::kBackward, st.delta_local[layers - 1]);
  for (std::size_t l = layers; l-- > 0;) {
    grads[l] = param_grad(st.delta_synced[l], w.adj, st.h[l]);
    if (l > 0) st.delta_local[l - 1] = backward_local(st.delta_synced[l], w.adj, w.params.weights[l], st.z_synced[l - 1]);
    if (config_.update_per_layer) {
      auto summed = reduce_params(w, epoch, static_cast<std::uint32_t>(l), std::span(&grads[l], 1));
      w.optimizer.step_layer(w.params, l, summed[0]);
      w.summed[l] = std::move(summed[0]);
    }
    if (l > 0) {
      st.delta_synced[l - 1] =
          sync(w, epoch, static_cast<std::uint32_t>(l - 1), Direction::kBackward, st.delta_local[l - 1]);
    }
  }
  if (!config_.update_per_layer) {
    w.summed = reduce_params(w, epoch, 0, grads);
    w.optimizer.step(w.params, w.summed);
  }

  if (config_.cache_enabled) w.controller.update(ratio(w.totals[1], w.totals[2]));
  barrier_->arrive_and_wait("epoch end (epoch " + std::to_string(epoch + 1) + ")");
  if (const std::size_t left = mailboxes_[w.id]->pending(); left != 0) {
    throw ProtocolError(std::to_string(left) + " unconsumed message(s) at end of epoch " + std::to_string(epoch + 1));
  }
}

template <typename T>
EpochMetrics Runtime<T>::run_epoch() {
  const std::uint64_t epoch = epoch_;
  const std::size_t p = workers_.size();
  barrier_ = std::make_unique<PhaseBarrier>(p, config_.barrier_timeout);
  for (auto& mb : mailboxes_) mb->clear();
  for (std::size_t k = 0; k < injected_.size(); ++k) {
    std::vector<SyncMessage<T>> one;
    one.push_back(std::move(injected_[k]));
    mailboxes_[injected_dest_[k]]->deposit(std::move(one));
  }
  injected_.clear();
  injected_dest_.clear();

  const auto start = std::chrono::steady_clock::now();
  std::mutex error_mutex;
  std::exception_ptr first_error;
  bool first_is_abort = true;
  {
    std::vector<std::jthread> threads;
    threads.reserve(p);
    for (std::size_t i = 0; i < p; ++i) {
      threads.emplace_back([&, i] {
        Worker& w = *workers_[i];
        std::exception_ptr err;
        bool is_abort = false;
        try {
          worker_epoch(w, epoch);
          return;
        } catch (const ProtocolError& e) {
          is_abort = barrier_->aborted();
          err = std::make_exception_ptr(ProtocolError("worker " + std::to_string(i) + ": " + e.what()));
          barrier_->abort("worker " + std::to_string(i) + " failed: " + e.what());
        } catch (const std::exception& e) {
          err = std::current_exception();
          barrier_->abort("worker " + std::to_string(i) + " failed: " + e.what());
        }
        std::lock_guard lock(error_mutex);
        if (!first_error || (first_is_abort && !is_abort)) {
          first_error = err;
          first_is_abort = is_abort;
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const Worker& lead = *workers_.front();
  EpochMetrics m;
  m.epoch = epoch + 1;
  m.loss = lead.totals[0] / static_cast<double>(total_train_);
  m.train_acc = ratio(lead.totals[1], lead.totals[2]);
  m.val_acc = ratio(lead.totals[3], lead.totals[4]);
  m.test_acc = ratio(lead.totals[5], lead.totals[6]);
  m.eps = lead.eps_now;
  m.fwd_sends.assign(config_.num_layers, 0);
  m.bwd_sends.assign(config_.num_layers, 0);
  for (const auto& w : workers_) {
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
      m.fwd_sends[l] += w->fwd_sends[l];
      m.bwd_sends[l] += w->bwd_sends[l];
    }
    m.inner_bytes += w->sent.inner_bytes;
    m.outer_bytes += w->sent.outer_bytes;
    const double t = model_comm_time(w->sent, config_.cost);
    m.modeled_comm_per_worker.push_back(t);
    m.modeled_comm_s = std::max(m.modeled_comm_s, t);
  }
  m.vertex_messages = m.total_sends();
  m.wall_s = config_.record_wall ? wall : 0.0;
  last_grads_ = lead.summed;
  ++epoch_;
  return m;
}

template class Mailbox<float>;
template class Mailbox<double>;
template class Runtime<float>;
template class Runtime<double>;

}  // namespace cdfgnn
