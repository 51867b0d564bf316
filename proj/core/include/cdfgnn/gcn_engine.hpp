#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cdfgnn/graph_store.hpp"
#include "cdfgnn/tensor_math.hpp"

namespace cdfgnn {

/// Feature widths F_0 .. F_L. Layer l maps F_l to F_{l+1}.
std::vector<std::size_t> layer_dims(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                                    std::size_t num_layers = 2);

template <typename T>
struct ModelParams {
  std::vector<DenseMatrix<T>> weights;

  std::size_t num_layers() const noexcept { return weights.size(); }
  std::size_t input_dim() const { return weights.front().rows(); }
  std::size_t output_dim() const { return weights.back().cols(); }

  /// Glorot-uniform draws, row-major per layer, from one seeded stream.
  static ModelParams glorot(std::span<const std::size_t> dims, std::uint64_t seed);

  /// Throws ShapeError if consecutive layers do not chain.
  void validate() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out;
  for (const auto& w : p.weights) out.weights.push_back(cast_matrix<To>(w));
  return out;
}

/// Per-layer values held by one worker. Index l of z/delta refers to layer
/// l+1's output; h[0] is the input features.
template <typename T>
struct LayerState {
  std::vector<DenseMatrix<T>> h;
  std::vector<DenseMatrix<T>> z_local;
  std::vector<DenseMatrix<T>> z_synced;
  std::vector<DenseMatrix<T>> delta_local;
  std::vector<DenseMatrix<T>> delta_synced;

  explicit LayerState(std::size_t num_layers = 0)
      : h(num_layers + 1), z_local(num_layers), z_synced(num_layers), delta_local(num_layers),
        delta_synced(num_layers) {}
};

/// spmm(adj, H_prev) * W.
template <typename T>
DenseMatrix<T> forward_local(const DenseMatrix<T>& h_prev, const DenseMatrix<T>& w, const CsrMatrix<T>& adj);

/// ReLU on hidden layers, identity on the final one.
template <typename T>
DenseMatrix<T> activate(const DenseMatrix<T>& z_synced, bool final_layer);

template <typename T>
struct LossResult {
  /// Cross-entropy summed over contributing vertices (not yet normalized).
  double loss_sum = 0.0;
  std::size_t train_correct = 0;
  std::size_t train_total = 0;
  std::size_t val_correct = 0;
  std::size_t val_total = 0;
  std::size_t test_correct = 0;
  std::size_t test_total = 0;
  DenseMatrix<T> grad;
};

/// Fused softmax cross-entropy on master train vertices. Gradient rows are
/// (softmax - onehot) / normalizer there and zero elsewhere. Accuracy
/// counters cover master vertices of each role. Throws BoundsError on a
/// label outside the logit width.
template <typename T>
LossResult<T> loss_and_output_grad(const DenseMatrix<T>& logits, std::span<const std::uint32_t> labels,
                                   std::span<const VertexRole> roles, std::span<const std::uint8_t> is_master,
                                   double normalizer);

/// spmm(adj, delta_next * Wᵀ) ⊙ relu'(Z_prev).
template <typename T>
DenseMatrix<T> backward_local(const DenseMatrix<T>& delta_next, const CsrMatrix<T>& adj, const DenseMatrix<T>& w,
                              const DenseMatrix<T>& z_prev_synced);

/// (spmm(adj, H_prev))ᵀ * delta: this worker's additive share of ∇W.
template <typename T>
DenseMatrix<T> param_grad(const DenseMatrix<T>& delta, const CsrMatrix<T>& adj, const DenseMatrix<T>& h_prev);

enum class OptimizerKind : std::uint8_t { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// SGD or Adam. Step counters are per layer so layers can be updated one at
/// a time during the backward pass with the same result as a full step.
template <typename T>
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(const OptimizerConfig& config, const ModelParams<T>& params);

  void step(ModelParams<T>& params, std::span<const DenseMatrix<T>> grads);
  void step_layer(ModelParams<T>& params, std::size_t layer, const DenseMatrix<T>& grad);

  const OptimizerConfig& config() const noexcept { return config_; }

 private:
  OptimizerConfig config_;
  std::vector<DenseMatrix<T>> m_;
  std::vector<DenseMatrix<T>> v_;
  std::vector<std::uint64_t> t_;
};

}  // namespace cdfgnn
