#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "cdfgnn/gcn_engine.hpp"
#include "cdfgnn/graph_store.hpp"

namespace cdfgnn {

/// Whole-graph forward/backward quantities for one parameter setting.
template <typename T>
struct OracleResult {
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  std::vector<DenseMatrix<T>> grads;
  /// Gradient of the loss with respect to the input features.
  DenseMatrix<T> input_grad;
  LayerState<T> state;
};

/// Single-device exact GCN step sharing every kernel and summation order
/// with the distributed path. The loss is the mean over train vertices.
template <typename T>
OracleResult<T> oracle_forward_backward(const CsrMatrix<T>& adj, const DenseMatrix<T>& features,
                                        const LabelSet& labels, const ModelParams<T>& params);

/// Mean train cross-entropy only (forward pass).
template <typename T>
double oracle_loss(const CsrMatrix<T>& adj, const DenseMatrix<T>& features, const LabelSet& labels,
                   const ModelParams<T>& params);

/// Central differences (f(x+h) - f(x-h)) / 2h per coordinate. Throws
/// NumericError if f returns a non-finite value, ArgumentError if step <= 0.
std::vector<double> finite_difference_grad(const std::function<double(std::span<const double>)>& loss_fn,
                                           std::span<const double> point, double step);

/// Finite-difference gradients of oracle_loss for every weight matrix.
std::vector<DenseMatrix<double>> finite_difference_params(const CsrMatrix<double>& adj,
                                                          const DenseMatrix<double>& features,
                                                          const LabelSet& labels, const ModelParams<double>& params,
                                                          double step);

/// Finite-difference gradient of oracle_loss with respect to the features.
DenseMatrix<double> finite_difference_features(const CsrMatrix<double>& adj, const DenseMatrix<double>& features,
                                               const LabelSet& labels, const ModelParams<double>& params,
                                               double step);

/// max |a - b| / max |b| over one tensor; 0 when both are zero.
double normwise_relative_error(std::span<const double> analytic, std::span<const double> reference);

/// Full-batch trainer on the whole graph.
template <typename T>
class OracleTrainer {
 public:
  OracleTrainer(const Graph& graph, const FeatureMatrix& features, const LabelSet& labels,
                ModelParams<T> params, const OptimizerConfig& optimizer);

  /// One epoch: forward/backward at the current parameters, then an
  /// optimizer step. Returns the pre-update quantities.
  OracleResult<T> step();

  const ModelParams<T>& params() const noexcept { return params_; }
  const CsrMatrix<T>& adjacency() const noexcept { return adj_; }
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  CsrMatrix<T> adj_;
  DenseMatrix<T> features_;
  LabelSet labels_;
  ModelParams<T> params_;
  Optimizer<T> optimizer_;
  std::size_t epoch_ = 0;
};

}  // namespace cdfgnn
