#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cdfgnn/bsp_runtime.hpp"

namespace cdfgnn {

inline constexpr int kMetricsSchemaVersion = 1;

/// Column names for an L-layer run, in file order.
std::vector<std::string> metrics_columns(std::size_t num_layers);

/// First line "# cdfgnn-metrics v<version> layers=<L>", then the header row,
/// then one row per epoch. Reals use 17 significant digits.
std::string format_metrics_csv(const std::vector<EpochMetrics>& rows, std::size_t num_layers);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& rows,
                       std::size_t num_layers);

struct MetricsTable {
  std::size_t num_layers = 0;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
  double at(std::size_t row, const std::string& name) const { return rows[row][column(name)]; }
  /// Sum of every fwd_sends_* and bwd_sends_* cell of one row.
  double sends(std::size_t row) const;
};

/// Throws SchemaError on a missing/unknown version line or a header that
/// does not match the declared layer count, IntegrityError on a bad row.
MetricsTable parse_metrics_csv(const std::string& text);
MetricsTable read_metrics_csv(const std::filesystem::path& path);

struct EpochDelta {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double sends = 0.0;
};

struct CompareReport {
  std::size_t common_epochs = 0;
  std::vector<EpochDelta> deltas;
  double final_train_acc_delta = 0.0;
  double final_val_acc_delta = 0.0;
  double total_sends_a = 0.0;
  double total_sends_b = 0.0;
  double total_bytes_a = 0.0;
  double total_bytes_b = 0.0;
  /// 1 - b/a over the common prefix; 0 when a is 0.
  double message_reduction = 0.0;
  double byte_reduction = 0.0;
  std::vector<std::string> warnings;
};

/// Deltas are b - a. Mismatched epoch counts compare the common prefix and
/// add a warning; mismatched layer counts throw SchemaError.
CompareReport compare_metrics(const MetricsTable& a, const MetricsTable& b);
std::string format_compare_report(const CompareReport& report);

}  // namespace cdfgnn
