#include "cdfgnn/gcn_engine.hpp"

#include <cmath>
#include <string>

#include "cdfgnn/error.hpp"
#include "cdfgnn/random.hpp"

namespace cdfgnn {

std::vector<std::size_t> layer_dims(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                                    std::size_t num_layers) {
  if (num_layers == 0) throw ArgumentError("model needs at least one layer");
  if (input_dim == 0 || num_classes == 0 || (num_layers > 1 && hidden_dim == 0)) {
    throw ArgumentError("layer widths must be positive");
  }
  std::vector<std::size_t> dims{input_dim};
  for (std::size_t l = 1; l < num_layers; ++l) dims.push_back(hidden_dim);
  dims.push_back(num_classes);
  return dims;
}

template <typename T>
ModelParams<T> ModelParams<T>::glorot(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw ArgumentError("glorot: need at least two widths");
  Rng rng(seed);
  ModelParams<T> p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    DenseMatrix<T> w(dims[l], dims[l + 1]);
    for (T& x : w.values()) x = static_cast<T>(rng.uniform(-limit, limit));
    p.weights.push_back(std::move(w));
  }
  return p;
}

template <typename T>
void ModelParams<T>::validate() const {
  if (weights.empty()) throw ShapeError("model has no layers");
  for (std::size_t l = 1; l < weights.size(); ++l) {
    if (weights[l].rows() != weights[l - 1].cols()) {
      throw ShapeError("layer " + std::to_string(l) + " input width does not match previous output width");
    }
  }
}

template <typename T>
DenseMatrix<T> forward_local(const DenseMatrix<T>& h_prev, const DenseMatrix<T>& w, const CsrMatrix<T>& adj) {
  return matmul(spmm(adj, h_prev), w);
}

template <typename T>
DenseMatrix<T> activate(const DenseMatrix<T>& z_synced, bool final_layer) {
  return final_layer ? z_synced : relu(z_synced);
}

template <typename T>
LossResult<T> loss_and_output_grad(const DenseMatrix<T>& logits, std::span<const std::uint32_t> labels,
                                   std::span<const VertexRole> roles, std::span<const std::uint8_t> is_master,
                                   double normalizer) {
  const std::size_t n = logits.rows();
  const std::size_t k = logits.cols();
  if (labels.size() != n || roles.size() != n || is_master.size() != n) {
    throw ShapeError("loss: label/role/master tables must match logit rows");
  }
  if (!(normalizer > 0.0)) throw ArgumentError("loss: normalizer must be positive");
  LossResult<T> out;
  out.grad = DenseMatrix<T>(n, k);
  const DenseMatrix<T> probs = softmax_rows(logits);
  const T scale = static_cast<T>(1.0 / normalizer);

  for (std::size_t r = 0; r < n; ++r) {
    if (!is_master[r] || roles[r] == VertexRole::kNone) continue;
    const std::uint32_t label = labels[r];
    if (label >= k) {
      throw BoundsError("loss: label " + std::to_string(label) + " outside " + std::to_string(k) + " classes");
    }
    const auto row = logits.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (row[c] > row[best]) best = c;
    }
    const bool hit = best == label;
    switch (roles[r]) {
      case VertexRole::kTrain: {
        ++out.train_total;
        out.train_correct += hit;
        T peak = row[0];
        for (std::size_t c = 1; c < k; ++c) peak = std::max(peak, row[c]);
        T total{0};
        for (std::size_t c = 0; c < k; ++c) total += std::exp(row[c] - peak);
        out.loss_sum += static_cast<double>(peak + std::log(total) - row[label]);
        auto g = out.grad.row(r);
        const auto pr = probs.row(r);
        for (std::size_t c = 0; c < k; ++c) g[c] = (pr[c] - (c == label ? T{1} : T{0})) * scale;
        break;
      }
      case VertexRole::kVal:
        ++out.val_total;
        out.val_correct += hit;
        break;
      case VertexRole::kTest:
        ++out.test_total;
        out.test_correct += hit;
        break;
      case VertexRole::kNone:
        break;
    }
  }
  return out;
}

template <typename T>
DenseMatrix<T> backward_local(const DenseMatrix<T>& delta_next, const CsrMatrix<T>& adj, const DenseMatrix<T>& w,
                              const DenseMatrix<T>& z_prev_synced) {
  return hadamard(spmm(adj, matmul_transpose_b(delta_next, w)), relu_grad(z_prev_synced));
}

template <typename T>
DenseMatrix<T> param_grad(const DenseMatrix<T>& delta, const CsrMatrix<T>& adj, const DenseMatrix<T>& h_prev) {
  return matmul_transpose_a(spmm(adj, h_prev), delta);
}

template <typename T>
Optimizer<T>::Optimizer(const OptimizerConfig& config, const ModelParams<T>& params) : config_(config) {
  if (!(config.lr > 0.0)) throw ArgumentError("optimizer: learning rate must be positive");
  for (const auto& w : params.weights) {
    m_.emplace_back(w.rows(), w.cols());
    v_.emplace_back(w.rows(), w.cols());
  }
  t_.assign(params.num_layers(), 0);
}

template <typename T>
void Optimizer<T>::step(ModelParams<T>& params, std::span<const DenseMatrix<T>> grads) {
  if (grads.size() != params.num_layers()) throw ShapeError("optimizer: one gradient per layer required");
  for (std::size_t l = 0; l < grads.size(); ++l) step_layer(params, l, grads[l]);
}

template <typename T>
void Optimizer<T>::step_layer(ModelParams<T>& params, std::size_t layer, const DenseMatrix<T>& grad) {
  if (layer >= params.num_layers() || layer >= t_.size()) throw ShapeError("optimizer: layer out of range");
  auto& w = params.weights[layer];
  if (grad.rows() != w.rows() || grad.cols() != w.cols()) {
    throw ShapeError("optimizer: gradient shape does not match layer " + std::to_string(layer));
  }
  auto wv = w.values();
  const auto gv = grad.values();
  const T lr = static_cast<T>(config_.lr);
  if (config_.kind == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < wv.size(); ++i) wv[i] -= lr * gv[i];
    return;
  }
  const std::uint64_t t = ++t_[layer];
  const T b1 = static_cast<T>(config_.beta1);
  const T b2 = static_cast<T>(config_.beta2);
  const T eps = static_cast<T>(config_.eps);
  const T c1 = static_cast<T>(1.0 - std::pow(config_.beta1, static_cast<double>(t)));
  const T c2 = static_cast<T>(1.0 - std::pow(config_.beta2, static_cast<double>(t)));
  auto mv = m_[layer].values();
  auto vv = v_[layer].values();
  for (std::size_t i = 0; i < wv.size(); ++i) {
    mv[i] = b1 * mv[i] + (T{1} - b1) * gv[i];
    vv[i] = b2 * vv[i] + (T{1} - b2) * gv[i] * gv[i];
    const T m_hat = mv[i] / c1;
    const T v_hat = vv[i] / c2;
    wv[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

#define CDFGNN_INSTANTIATE_GCN(T)                                                                          \
  template struct ModelParams<T>;                                                                          \
  template DenseMatrix<T> forward_local(const DenseMatrix<T>&, const DenseMatrix<T>&, const CsrMatrix<T>&); \
  template DenseMatrix<T> activate(const DenseMatrix<T>&, bool);                                           \
  template LossResult<T> loss_and_output_grad(const DenseMatrix<T>&, std::span<const std::uint32_t>,       \
                                              std::span<const VertexRole>, std::span<const std::uint8_t>,  \
                                              double);                                                     \
  template DenseMatrix<T> backward_local(const DenseMatrix<T>&, const CsrMatrix<T>&, const DenseMatrix<T>&, \
                                         const DenseMatrix<T>&);                                           \
  template DenseMatrix<T> param_grad(const DenseMatrix<T>&, const CsrMatrix<T>&, const DenseMatrix<T>&);   \
  template class Optimizer<T>;

CDFGNN_INSTANTIATE_GCN(float)
CDFGNN_INSTANTIATE_GCN(double)

#undef CDFGNN_INSTANTIATE_GCN

}  // namespace cdfgnn
