#include "cdfgnn/reference_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdfgnn/error.hpp"

namespace cdfgnn {

namespace {

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : double(num) / double(den); }

template <typename T>
LossResult<T> forward(const CsrMatrix<T>& adj, const DenseMatrix<T>& features, const LabelSet& labels,
                      const ModelParams<T>& params, LayerState<T>& state) {
  params.validate();
  if (features.rows() != adj.rows) throw ShapeError("oracle: feature rows do not match vertex count");
  if (features.cols() != params.input_dim()) throw ShapeError("oracle: feature width does not match first layer");
  const std::size_t layers = params.num_layers();
  state = LayerState<T>(layers);
  state.h[0] = features;
  for (std::size_t l = 0; l < layers; ++l) {
    state.z_local[l] = forward_local(state.h[l], params.weights[l], adj);
    state.z_synced[l] = state.z_local[l];
    state.h[l + 1] = activate(state.z_synced[l], l + 1 == layers);
  }
  const std::vector<std::uint8_t> all_masters(adj.rows, 1);
  const double normalizer = static_cast<double>(std::max<std::size_t>(1, labels.count(VertexRole::kTrain)));
  return loss_and_output_grad<T>(state.h[layers], labels.labels, labels.roles, all_masters, normalizer);
}

}  // namespace

template <typename T>
OracleResult<T> oracle_forward_backward(const CsrMatrix<T>& adj, const DenseMatrix<T>& features,
                                        const LabelSet& labels, const ModelParams<T>& params) {
  OracleResult<T> out;
  LossResult<T> loss = forward(adj, features, labels, params, out.state);
  const std::size_t layers = params.num_layers();
  const double normalizer = static_cast<double>(std::max<std::size_t>(1, labels.count(VertexRole::kTrain)));
  out.loss = loss.loss_sum / normalizer;
  out.train_acc = ratio(loss.train_correct, loss.train_total);
  out.val_acc = ratio(loss.val_correct, loss.val_total);
  out.test_acc = ratio(loss.test_correct, loss.test_total);

  auto& st = out.state;
  st.delta_local[layers - 1] = std::move(loss.grad);
  st.delta_synced[layers - 1] = st.delta_local[layers - 1];
  out.grads.resize(layers);
  for (std::size_t l = layers; l-- > 0;) {
    out.grads[l] = param_grad(st.delta_synced[l], adj, st.h[l]);
    if (l > 0) {
      st.delta_local[l - 1] = backward_local(st.delta_synced[l], adj, params.weights[l], st.z_synced[l - 1]);
      st.delta_synced[l - 1] = st.delta_local[l - 1];
    }
  }
  out.input_grad = spmm(adj, matmul_transpose_b(st.delta_synced[0], params.weights[0]));
  return out;
}

template <typename T>
double oracle_loss(const CsrMatrix<T>& adj, const DenseMatrix<T>& features, const LabelSet& labels,
                   const ModelParams<T>& params) {
  LayerState<T> state;
  const LossResult<T> loss = forward(adj, features, labels, params, state);
  return loss.loss_sum / static_cast<double>(std::max<std::size_t>(1, labels.count(VertexRole::kTrain)));
}

std::vector<double> finite_difference_grad(const std::function<double(std::span<const double>)>& loss_fn,
                                           std::span<const double> point, double step) {
  if (!(step > 0.0)) throw ArgumentError("finite_difference_grad: step must be positive");
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = loss_fn(x);
    x[i] = saved - step;
    const double down = loss_fn(x);
    x[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_difference_grad: non-finite loss at coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

std::vector<DenseMatrix<double>> finite_difference_params(const CsrMatrix<double>& adj,
                                                          const DenseMatrix<double>& features,
                                                          const LabelSet& labels, const ModelParams<double>& params,
                                                          double step) {
  std::vector<DenseMatrix<double>> out;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    const auto& w = params.weights[l];
    ModelParams<double> probe = params;
    auto fn = [&](std::span<const double> x) {
      std::copy(x.begin(), x.end(), probe.weights[l].values().begin());
      return oracle_loss(adj, features, labels, probe);
    };
    auto g = finite_difference_grad(fn, w.values(), step);
    out.emplace_back(w.rows(), w.cols(), std::move(g));
  }
  return out;
}

DenseMatrix<double> finite_difference_features(const CsrMatrix<double>& adj, const DenseMatrix<double>& features,
                                               const LabelSet& labels, const ModelParams<double>& params,
                                               double step) {
  DenseMatrix<double> probe = features;
  auto fn = [&](std::span<const double> x) {
    std::copy(x.begin(), x.end(), probe.values().begin());
    return oracle_loss(adj, probe, labels, params);
  };
  return DenseMatrix<double>(features.rows(), features.cols(), finite_difference_grad(fn, features.values(), step));
}

double normwise_relative_error(std::span<const double> analytic, std::span<const double> reference) {
  if (analytic.size() != reference.size()) throw ShapeError("normwise_relative_error: length mismatch");
  const double diff = linf_distance<double>(analytic, reference);
  const double scale = linf_norm<double>(reference);
  if (scale == 0.0) return diff == 0.0 ? 0.0 : diff;
  return diff / scale;
}

template <typename T>
OracleTrainer<T>::OracleTrainer(const Graph& graph, const FeatureMatrix& features, const LabelSet& labels,
                                ModelParams<T> params, const OptimizerConfig& optimizer)
    : adj_(normalize<T>(graph)), features_(cast_matrix<T>(features.values)), labels_(labels),
      params_(std::move(params)), optimizer_(optimizer, params_) {
  labels_.validate(graph.num_vertices());
  if (features.rows() != graph.num_vertices()) throw ShapeError("oracle: feature rows do not match vertex count");
}

template <typename T>
OracleResult<T> OracleTrainer<T>::step() {
  OracleResult<T> result = oracle_forward_backward(adj_, features_, labels_, params_);
  optimizer_.step(params_, result.grads);
  ++epoch_;
  return result;
}

#define CDFGNN_INSTANTIATE_ORACLE(T)                                                                       \
  template OracleResult<T> oracle_forward_backward(const CsrMatrix<T>&, const DenseMatrix<T>&,             \
                                                   const LabelSet&, const ModelParams<T>&);                \
  template double oracle_loss(const CsrMatrix<T>&, const DenseMatrix<T>&, const LabelSet&,                 \
                              const ModelParams<T>&);                                                      \
  template class OracleTrainer<T>;

CDFGNN_INSTANTIATE_ORACLE(float)
CDFGNN_INSTANTIATE_ORACLE(double)

#undef CDFGNN_INSTANTIATE_ORACLE

}  // namespace cdfgnn
