#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cdfgnn/bsp_runtime.hpp"
#include "cdfgnn/config.hpp"
#include "cdfgnn/graph_store.hpp"
#include "cdfgnn/metrics_io.hpp"
#include "cdfgnn/partitioner.hpp"

namespace cdfgnn {

struct Dataset {
  Graph graph;
  FeatureMatrix features;
  LabelSet labels;
};

/// Reads graph, features and labels named by cfg and checks they agree.
Dataset load_dataset(const TrainConfig& cfg);

/// Partitions the graph, or loads cfg.plan when it is set.
PartitionPlan plan_for(const TrainConfig& cfg, const Graph& graph);

struct RunResult {
  std::size_t num_layers = 0;
  std::vector<EpochMetrics> metrics;
  double final_loss = 0.0;
  double final_train_acc = 0.0;
  double final_val_acc = 0.0;
  double final_test_acc = 0.0;
  std::uint64_t total_messages = 0;
  std::uint64_t total_bytes = 0;
  double modeled_comm_s = 0.0;
};

RunResult run_distributed(const Dataset& data, const PartitionPlan& plan, const RuntimeConfig& runtime,
                          std::size_t epochs, Precision precision);

/// Whole-graph training with the metrics schema of the distributed runs
/// (every communication column is zero).
RunResult run_oracle(const Dataset& data, const RuntimeConfig& runtime, std::size_t epochs, Precision precision);

struct TrainSummary {
  RunResult run;
  /// Cache-off, quantization-off run of the same configuration.
  std::optional<RunResult> exact;
  PartitionStats stats;
  ClusterShape cluster;
  std::vector<std::string> warnings;
};

std::string summary_to_json(const TrainConfig& cfg, const TrainSummary& summary);

/// Runs `train`: partition (or load), epochs, metrics CSV, JSON summary.
TrainSummary cmd_train(const TrainConfig& cfg, std::ostream& log);

/// Runs `oracle-train` and writes its metrics CSV.
RunResult cmd_oracle_train(const TrainConfig& cfg, std::ostream& log);

CompareReport cmd_compare(const std::filesystem::path& a, const std::filesystem::path& b);

}  // namespace cdfgnn
