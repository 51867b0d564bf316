#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdfgnn/bsp_runtime.hpp"
#include "cdfgnn/partitioner.hpp"

namespace cdfgnn {

enum class Precision : std::uint8_t { kF32, kF64 };

/// Everything `train` and `oracle-train` need.
struct TrainConfig {
  std::filesystem::path graph;
  std::filesystem::path features;
  std::filesystem::path labels;
  /// Load this plan instead of partitioning.
  std::filesystem::path plan;
  ClusterShape cluster{1, 1};
  PartitionOptions partition;
  std::size_t epochs = 20;
  Precision precision = Precision::kF64;
  RuntimeConfig runtime;
  std::filesystem::path metrics_out;
  std::filesystem::path summary_out;
  bool compare_exact = false;
};

/// key=value lines; '#' starts a comment; blank lines ignored. Throws
/// ParseError naming the line for anything else or a repeated key.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> load_config_file(const std::filesystem::path& path);

/// Applies recognised keys onto cfg. Unknown keys and malformed values throw
/// ArgumentError. Returns warnings for settings that have no effect.
std::vector<std::string> apply_config(const std::map<std::string, std::string>& values, TrainConfig& cfg);

/// Every key apply_config accepts.
const std::vector<std::string>& config_keys();

bool parse_bool(const std::string& key, const std::string& value);
Precision parse_precision(const std::string& value);
OptimizerKind parse_optimizer(const std::string& value);
ScatterEncoding parse_scatter(const std::string& value);
std::string to_string(Precision p);
std::string to_string(OptimizerKind k);

}  // namespace cdfgnn
