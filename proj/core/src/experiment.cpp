#include "cdfgnn/experiment.hpp"

#include <fstream>

#include <json.hpp>

#include "cdfgnn/error.hpp"
#include "cdfgnn/reference_oracle.hpp"

namespace cdfgnn {

namespace {

void finish(RunResult& r) {
  for (const auto& m : r.metrics) {
    r.total_messages += m.total_sends();
    r.total_bytes += m.inner_bytes + m.outer_bytes;
    r.modeled_comm_s += m.modeled_comm_s;
  }
  if (!r.metrics.empty()) {
    const auto& last = r.metrics.back();
    r.final_loss = last.loss;
    r.final_train_acc = last.train_acc;
    r.final_val_acc = last.val_acc;
    r.final_test_acc = last.test_acc;
  }
}

template <typename T>
RunResult run_distributed_as(const Dataset& data, const PartitionPlan& plan, const RuntimeConfig& runtime,
                             std::size_t epochs) {
  Runtime<T> rt(data.graph, data.features, data.labels, plan, runtime);
  RunResult r;
  r.num_layers = runtime.num_layers;
  for (std::size_t e = 0; e < epochs; ++e) r.metrics.push_back(rt.run_epoch());
  finish(r);
  return r;
}

template <typename T>
RunResult run_oracle_as(const Dataset& data, const RuntimeConfig& runtime, std::size_t epochs) {
  const auto dims =
      layer_dims(data.features.dim(), runtime.hidden_dim, data.labels.num_classes, runtime.num_layers);
  OracleTrainer<T> trainer(data.graph, data.features, data.labels, ModelParams<T>::glorot(dims, runtime.weight_seed),
                           runtime.optimizer);
  RunResult r;
  r.num_layers = runtime.num_layers;
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto res = trainer.step();
    EpochMetrics m;
    m.epoch = e + 1;
    m.loss = res.loss;
    m.train_acc = res.train_acc;
    m.val_acc = res.val_acc;
    m.test_acc = res.test_acc;
    m.fwd_sends.assign(runtime.num_layers, 0);
    m.bwd_sends.assign(runtime.num_layers, 0);
    r.metrics.push_back(std::move(m));
  }
  finish(r);
  return r;
}

nlohmann::json run_json(const RunResult& r) {
  return {{"epochs", r.metrics.size()},
          {"final_loss", r.final_loss},
          {"final_train_acc", r.final_train_acc},
          {"final_val_acc", r.final_val_acc},
          {"final_test_acc", r.final_test_acc},
          {"total_vertex_messages", r.total_messages},
          {"total_bytes", r.total_bytes},
          {"modeled_comm_s", r.modeled_comm_s}};
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

Dataset load_dataset(const TrainConfig& cfg) {
  if (cfg.graph.empty() || cfg.features.empty() || cfg.labels.empty()) {
    throw ArgumentError("graph, features and labels paths are required");
  }
  Dataset d{load_edge_list(cfg.graph), load_features(cfg.features), load_labels(cfg.labels)};
  if (d.features.rows() != d.graph.num_vertices()) {
    throw IntegrityError("features have " + std::to_string(d.features.rows()) + " rows for " +
                         std::to_string(d.graph.num_vertices()) + " vertices");
  }
  if (d.labels.labels.size() != d.graph.num_vertices()) {
    throw IntegrityError("labels have " + std::to_string(d.labels.labels.size()) + " rows for " +
                         std::to_string(d.graph.num_vertices()) + " vertices");
  }
  d.labels.validate(d.graph.num_vertices());
  return d;
}

PartitionPlan plan_for(const TrainConfig& cfg, const Graph& graph) {
  if (!cfg.plan.empty()) return load_plan(cfg.plan);
  return partition(graph, cfg.cluster, cfg.partition).plan;
}

RunResult run_distributed(const Dataset& data, const PartitionPlan& plan, const RuntimeConfig& runtime,
                          std::size_t epochs, Precision precision) {
  return precision == Precision::kF32 ? run_distributed_as<float>(data, plan, runtime, epochs)
                                      : run_distributed_as<double>(data, plan, runtime, epochs);
}

RunResult run_oracle(const Dataset& data, const RuntimeConfig& runtime, std::size_t epochs, Precision precision) {
  return precision == Precision::kF32 ? run_oracle_as<float>(data, runtime, epochs)
                                      : run_oracle_as<double>(data, runtime, epochs);
}

std::string summary_to_json(const TrainConfig& cfg, const TrainSummary& s) {
  nlohmann::json j;
  j["hosts"] = s.cluster.num_hosts;
  j["gpus_per_host"] = s.cluster.gpus_per_host;
  j["precision"] = to_string(cfg.precision);
  j["optimizer"] = to_string(cfg.runtime.optimizer.kind);
  j["cache_enabled"] = cfg.runtime.cache_enabled;
  j["quant_enabled"] = cfg.runtime.quant_enabled;
  j["quant_bits"] = cfg.runtime.quant_bits;
  j["partition"] = {{"replication_factor", s.stats.replication_factor},
                    {"edge_imbalance", s.stats.edge_imbalance},
                    {"vertex_imbalance", s.stats.vertex_imbalance},
                    {"inner_max", s.stats.inner_max},
                    {"outer_max", s.stats.outer_max}};
  j["run"] = run_json(s.run);
  if (s.exact) {
    j["exact"] = run_json(*s.exact);
    const auto ratio = [](double a, double b) { return a == 0.0 ? 0.0 : 1.0 - b / a; };
    j["message_reduction"] = ratio(double(s.exact->total_messages), double(s.run.total_messages));
    j["byte_reduction"] = ratio(double(s.exact->total_bytes), double(s.run.total_bytes));
    j["final_train_acc_delta"] = s.run.final_train_acc - s.exact->final_train_acc;
  }
  j["warnings"] = s.warnings;
  return j.dump(2) + "\n";
}

TrainSummary cmd_train(const TrainConfig& cfg, std::ostream& log) {
  const Dataset data = load_dataset(cfg);
  const PartitionPlan plan = plan_for(cfg, data.graph);
  TrainSummary s;
  s.stats = compute_stats(plan);
  s.cluster = plan.cluster;
  log << "partition: " << plan.cluster.num_workers() << " workers, RF " << s.stats.replication_factor << ", outer_max "
      << s.stats.outer_max << "\n";
  s.run = run_distributed(data, plan, cfg.runtime, cfg.epochs, cfg.precision);
  if (cfg.compare_exact) {
    RuntimeConfig exact = cfg.runtime;
    exact.cache_enabled = false;
    exact.quant_enabled = false;
    s.exact = run_distributed(data, plan, exact, cfg.epochs, cfg.precision);
  }
  if (!cfg.metrics_out.empty()) write_metrics_csv(cfg.metrics_out, s.run.metrics, s.run.num_layers);
  if (!cfg.summary_out.empty()) write_file(cfg.summary_out, summary_to_json(cfg, s));
  log << "train: " << s.run.metrics.size() << " epochs, final train acc " << s.run.final_train_acc << ", "
      << s.run.total_messages << " vertex messages\n";
  return s;
}

RunResult cmd_oracle_train(const TrainConfig& cfg, std::ostream& log) {
  const Dataset data = load_dataset(cfg);
  RunResult r = run_oracle(data, cfg.runtime, cfg.epochs, cfg.precision);
  if (!cfg.metrics_out.empty()) write_metrics_csv(cfg.metrics_out, r.metrics, r.num_layers);
  log << "oracle-train: " << r.metrics.size() << " epochs, final train acc " << r.final_train_acc << "\n";
  return r;
}

CompareReport cmd_compare(const std::filesystem::path& a, const std::filesystem::path& b) {
  return compare_metrics(read_metrics_csv(a), read_metrics_csv(b));
}

}  // namespace cdfgnn
