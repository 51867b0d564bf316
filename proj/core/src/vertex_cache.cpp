#include "cdfgnn/vertex_cache.hpp"

#include <algorithm>
#include <string>

#include "cdfgnn/error.hpp"

namespace cdfgnn {

namespace {

constexpr std::size_t kNoSlot = static_cast<std::size_t>(-1);

template <typename T>
std::vector<T> difference(std::span<const T> a, std::span<const T> b) {
  std::vector<T> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = a[k] - b[k];
  return out;
}

template <typename T>
void add_into(std::vector<T>& target, const std::vector<T>& delta) {
  for (std::size_t k = 0; k < target.size(); ++k) target[k] += delta[k];
}

}  // namespace

template <typename T>
bool should_send(std::span<const T> current, std::span<const T> snapshot, double eps) {
  if (current.size() != snapshot.size()) throw ShapeError("should_send: length mismatch");
  const double drift = static_cast<double>(linf_distance<T>(current, snapshot));
  const double scale = static_cast<double>(linf_norm<T>(snapshot));
  return drift > eps * scale;
}

EpsilonController::EpsilonController(const EpsilonConfig& config) : config_(config), eps_(config.eps_init) {}

double EpsilonController::update(double acc) {
  if (!primed_) {
    mean_acc_ = acc;
    primed_ = true;
    return eps_;
  }
  if (config_.adaptive) {
    if (acc < mean_acc_ - config_.mu1 && eps_ < config_.nu1) {
      eps_ = std::min({config_.lambda1 * eps_, eps_ + config_.xi, config_.nu1});
    } else if (acc > mean_acc_ + config_.mu2 && eps_ > config_.nu2) {
      eps_ = std::max({config_.lambda2 * eps_, eps_ - config_.xi, config_.nu2});
    }
  }
  mean_acc_ = 0.8 * mean_acc_ + 0.2 * acc;
  return eps_;
}

template <typename T>
VertexCache<T>::VertexCache(const PartitionPlan& plan, WorkerId self, std::size_t dim, bool cached,
                            ScatterEncoding scatter)
    : plan_(&plan), self_(self), dim_(dim), cached_(cached), scatter_(scatter) {
  if (self >= plan.workers.size()) throw ArgumentError("VertexCache: worker " + std::to_string(self) + " not in plan");
  const auto& wp = plan.workers[self];
  slot_of_.assign(wp.num_local(), kNoSlot);
  for (LocalId l = 0; l < wp.num_local(); ++l) {
    const VertexId g = wp.local_to_global[l];
    if (!plan.is_replicated(g)) continue;
    Slot s;
    s.local = l;
    s.global = g;
    s.master = plan.master_of[g];
    s.is_master = wp.is_master[l] != 0;
    s.local_snapshot.assign(dim, T{0});
    s.published.assign(dim, T{0});
    if (s.is_master) {
      for (WorkerId w : plan.replicas_of(g)) {
        if (w != self) s.mirrors.push_back(w);
      }
      s.mirror_snapshots.assign(s.mirrors.size(), std::vector<T>(dim, T{0}));
      s.aggregate.assign(dim, T{0});
    }
    slot_of_[l] = slots_.size();
    slots_.push_back(std::move(s));
  }
}

template <typename T>
typename VertexCache<T>::Slot& VertexCache<T>::slot_for(VertexId global, const char* phase) {
  const auto local = plan_->workers[self_].local_of(global);
  if (!local || slot_of_[*local] == kNoSlot) {
    throw ProtocolError(std::string(phase) + ": worker " + std::to_string(self_) + " holds no replicated copy of vertex " +
                        std::to_string(global));
  }
  return slots_[slot_of_[*local]];
}

template <typename T>
void VertexCache<T>::recompute_aggregate(Slot& s) {
  std::fill(s.aggregate.begin(), s.aggregate.end(), T{0});
  for (const auto& snap : s.mirror_snapshots) {
    for (std::size_t k = 0; k < dim_; ++k) s.aggregate[k] += snap[k];
  }
  for (std::size_t k = 0; k < dim_; ++k) s.aggregate[k] += s.local_snapshot[k];
}

template <typename T>
std::vector<VertexMessage<T>> VertexCache<T>::mirror_pass(const DenseMatrix<T>& current, double eps,
                                                          const PayloadCodec<T>& codec) {
  if (current.cols() != dim_ || current.rows() != slot_of_.size()) throw ShapeError("mirror_pass: value shape");
  std::vector<VertexMessage<T>> out;
  for (Slot& s : slots_) {
    if (s.is_master) continue;
    const auto row = current.row(s.local);
    if (cached_ && !should_send<T>(row, s.local_snapshot, eps)) continue;
    VertexMessage<T> msg{self_, s.master, s.global, {}};
    if (cached_ && !codec.lossless()) {
      msg.payload = codec.encode(difference<T>(row, s.local_snapshot));
      add_into(s.local_snapshot, codec.decode(msg.payload));
    } else {
      msg.payload = codec.encode(row);
      s.local_snapshot = codec.decode(msg.payload);
    }
    out.push_back(std::move(msg));
  }
  return out;
}

template <typename T>
std::vector<LocalId> VertexCache<T>::master_pass(std::span<const VertexMessage<T>> received,
                                                 const DenseMatrix<T>& current, double eps,
                                                 const PayloadCodec<T>& codec) {
  if (current.cols() != dim_ || current.rows() != slot_of_.size()) throw ShapeError("master_pass: value shape");
  std::vector<std::uint8_t> active(slot_of_.size(), 0);
  std::vector<std::vector<std::uint8_t>> seen(slots_.size());

  for (const auto& msg : received) {
    if (msg.dest != self_) throw ProtocolError("gather: message for worker " + std::to_string(msg.dest) +
                                               " delivered to worker " + std::to_string(self_));
    Slot& s = slot_for(msg.vertex, "gather");
    if (!s.is_master) {
      throw ProtocolError("gather: worker " + std::to_string(self_) + " is not the master of vertex " +
                          std::to_string(msg.vertex));
    }
    const auto it = std::find(s.mirrors.begin(), s.mirrors.end(), msg.source);
    if (it == s.mirrors.end()) {
      throw ProtocolError("gather: worker " + std::to_string(msg.source) + " is not a mirror of vertex " +
                          std::to_string(msg.vertex));
    }
    const std::size_t m = static_cast<std::size_t>(it - s.mirrors.begin());
    auto& flags = seen[slot_of_[s.local]];
    if (flags.empty()) flags.assign(s.mirrors.size(), 0);
    if (flags[m]) {
      throw ProtocolError("gather: duplicate message for vertex " + std::to_string(msg.vertex) + " from worker " +
                          std::to_string(msg.source));
    }
    flags[m] = 1;
    auto decoded = codec.decode(msg.payload);
    if (decoded.size() != dim_) throw ProtocolError("gather: payload length mismatch for vertex " +
                                                    std::to_string(msg.vertex));
    if (cached_ && !codec.lossless()) {
      add_into(s.mirror_snapshots[m], decoded);
    } else {
      s.mirror_snapshots[m] = std::move(decoded);
    }
    active[s.local] = 1;
  }

  for (std::size_t i = 0; i < slots_.size(); ++i) {
    Slot& s = slots_[i];
    if (!s.is_master) continue;
    if (!cached_) {
      if (seen[i].empty() || std::find(seen[i].begin(), seen[i].end(), 0) != seen[i].end()) {
        throw ProtocolError("gather: missing mirror message for vertex " + std::to_string(s.global) +
                            " at worker " + std::to_string(self_));
      }
    }
    const auto row = current.row(s.local);
    if (!cached_ || should_send<T>(row, s.local_snapshot, eps)) {
      s.local_snapshot.assign(row.begin(), row.end());
      active[s.local] = 1;
    }
  }

  std::vector<LocalId> out;
  for (Slot& s : slots_) {
    if (s.is_master && active[s.local]) {
      recompute_aggregate(s);
      out.push_back(s.local);
    }
  }
  return out;
}

template <typename T>
std::vector<VertexMessage<T>> VertexCache<T>::scatter_pass(std::span<const LocalId> active,
                                                           const PayloadCodec<T>& codec) {
  std::vector<VertexMessage<T>> out;
  const bool additive = cached_ && !codec.lossless() && scatter_ == ScatterEncoding::kDelta;
  for (LocalId l : active) {
    if (l >= slot_of_.size() || slot_of_[l] == kNoSlot || !slots_[slot_of_[l]].is_master) {
      throw ProtocolError("scatter: local vertex " + std::to_string(l) + " is not a replicated master on worker " +
                          std::to_string(self_));
    }
    Slot& s = slots_[slot_of_[l]];
    Payload<T> payload;
    if (additive) {
      payload = codec.encode(difference<T>(s.aggregate, s.published));
      add_into(s.published, codec.decode(payload));
    } else {
      payload = codec.encode(s.aggregate);
      s.published = codec.decode(payload);
    }
    for (WorkerId w : s.mirrors) out.push_back({self_, w, s.global, payload});
  }
  return out;
}

template <typename T>
void VertexCache<T>::apply_scatter(std::span<const VertexMessage<T>> received, const PayloadCodec<T>& codec) {
  const bool additive = cached_ && !codec.lossless() && scatter_ == ScatterEncoding::kDelta;
  std::vector<std::uint8_t> seen(slots_.size(), 0);
  for (const auto& msg : received) {
    if (msg.dest != self_) throw ProtocolError("scatter: message for worker " + std::to_string(msg.dest) +
                                               " delivered to worker " + std::to_string(self_));
    Slot& s = slot_for(msg.vertex, "scatter");
    if (s.is_master || msg.source != s.master) {
      throw ProtocolError("scatter: worker " + std::to_string(msg.source) + " is not the master of vertex " +
                          std::to_string(msg.vertex) + " for mirror " + std::to_string(self_));
    }
    const std::size_t i = slot_of_[s.local];
    if (seen[i]) throw ProtocolError("scatter: duplicate payload for vertex " + std::to_string(msg.vertex));
    seen[i] = 1;
    auto decoded = codec.decode(msg.payload);
    if (decoded.size() != dim_) throw ProtocolError("scatter: payload length mismatch for vertex " +
                                                    std::to_string(msg.vertex));
    if (additive) {
      add_into(s.published, decoded);
    } else {
      s.published = std::move(decoded);
    }
  }
  if (!cached_) {
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      if (!slots_[i].is_master && !seen[i]) {
        throw ProtocolError("scatter: missing payload for vertex " + std::to_string(slots_[i].global) +
                            " at worker " + std::to_string(self_));
      }
    }
  }
}

template <typename T>
DenseMatrix<T> VertexCache<T>::synced(const DenseMatrix<T>& current) const {
  if (current.cols() != dim_ || current.rows() != slot_of_.size()) throw ShapeError("synced: value shape");
  DenseMatrix<T> out = current;
  for (const Slot& s : slots_) std::copy(s.published.begin(), s.published.end(), out.row(s.local).begin());
  return out;
}

template <typename T>
std::span<const T> VertexCache<T>::local_snapshot(LocalId l) const {
  if (l >= slot_of_.size() || slot_of_[l] == kNoSlot) throw ArgumentError("local_snapshot: vertex not replicated");
  return slots_[slot_of_[l]].local_snapshot;
}

template <typename T>
std::span<const T> VertexCache<T>::published(LocalId l) const {
  if (l >= slot_of_.size() || slot_of_[l] == kNoSlot) throw ArgumentError("published: vertex not replicated");
  return slots_[slot_of_[l]].published;
}

template <typename T>
std::span<const T> VertexCache<T>::aggregate(LocalId l) const {
  if (l >= slot_of_.size() || slot_of_[l] == kNoSlot || !slots_[slot_of_[l]].is_master) {
    throw ArgumentError("aggregate: vertex is not a replicated master here");
  }
  return slots_[slot_of_[l]].aggregate;
}

template bool should_send<float>(std::span<const float>, std::span<const float>, double);
template bool should_send<double>(std::span<const double>, std::span<const double>, double);
template class VertexCache<float>;
template class VertexCache<double>;

}  // namespace cdfgnn
