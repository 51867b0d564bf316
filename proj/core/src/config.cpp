#include "cdfgnn/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "cdfgnn/error.hpp"

namespace cdfgnn {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double d = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return d;
  } catch (const std::exception&) {
    throw ArgumentError(key + ": expected a number, got '" + value + "'");
  }
}

std::uint64_t to_uint(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ArgumentError(key + ": expected a non-negative integer, got '" + value + "'");
  return out;
}

using Setter = std::function<void(TrainConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"graph", [](TrainConfig& c, const auto&, const auto& v) { c.graph = v; }},
      {"features", [](TrainConfig& c, const auto&, const auto& v) { c.features = v; }},
      {"labels", [](TrainConfig& c, const auto&, const auto& v) { c.labels = v; }},
      {"plan", [](TrainConfig& c, const auto&, const auto& v) { c.plan = v; }},
      {"hosts", [](TrainConfig& c, const auto& k, const auto& v) { c.cluster.num_hosts = std::uint32_t(to_uint(k, v)); }},
      {"gpus_per_host",
       [](TrainConfig& c, const auto& k, const auto& v) { c.cluster.gpus_per_host = std::uint32_t(to_uint(k, v)); }},
      {"alpha", [](TrainConfig& c, const auto& k, const auto& v) { c.partition.alpha = to_double(k, v); }},
      {"beta", [](TrainConfig& c, const auto& k, const auto& v) { c.partition.beta = to_double(k, v); }},
      {"gamma", [](TrainConfig& c, const auto& k, const auto& v) { c.partition.gamma = to_double(k, v); }},
      {"partition.seed",
       [](TrainConfig& c, const auto& k, const auto& v) { c.partition.edge_order_seed = to_uint(k, v); }},
      {"epochs", [](TrainConfig& c, const auto& k, const auto& v) { c.epochs = to_uint(k, v); }},
      {"precision", [](TrainConfig& c, const auto&, const auto& v) { c.precision = parse_precision(v); }},
      {"seed", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.weight_seed = to_uint(k, v); }},
      {"hidden", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.hidden_dim = to_uint(k, v); }},
      {"layers", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.num_layers = to_uint(k, v); }},
      {"optimizer", [](TrainConfig& c, const auto&, const auto& v) { c.runtime.optimizer.kind = parse_optimizer(v); }},
      {"lr", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.optimizer.lr = to_double(k, v); }},
      {"adam.beta1", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.optimizer.beta1 = to_double(k, v); }},
      {"adam.beta2", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.optimizer.beta2 = to_double(k, v); }},
      {"adam.eps", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.optimizer.eps = to_double(k, v); }},
      {"cache.enabled", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.cache_enabled = parse_bool(k, v); }},
      {"cache.adaptive",
       [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.epsilon.adaptive = parse_bool(k, v); }},
      {"cache.eps_init",
       [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.epsilon.eps_init = to_double(k, v); }},
      {"cache.mu1", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.epsilon.mu1 = to_double(k, v); }},
      {"cache.mu2", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.epsilon.mu2 = to_double(k, v); }},
      {"cache.nu1", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.epsilon.nu1 = to_double(k, v); }},
      {"cache.nu2", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.epsilon.nu2 = to_double(k, v); }},
      {"cache.xi", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.epsilon.xi = to_double(k, v); }},
      {"cache.lambda1",
       [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.epsilon.lambda1 = to_double(k, v); }},
      {"cache.lambda2",
       [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.epsilon.lambda2 = to_double(k, v); }},
      {"cache.scatter", [](TrainConfig& c, const auto&, const auto& v) { c.runtime.scatter = parse_scatter(v); }},
      {"quant.enabled", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.quant_enabled = parse_bool(k, v); }},
      {"quant.bits",
       [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.quant_bits = static_cast<int>(to_uint(k, v)); }},
      {"update_per_layer",
       [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.update_per_layer = parse_bool(k, v); }},
      {"record_wall", [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.record_wall = parse_bool(k, v); }},
      {"barrier_timeout_ms",
       [](TrainConfig& c, const auto& k, const auto& v) {
         c.runtime.barrier_timeout = std::chrono::milliseconds(to_uint(k, v));
       }},
      {"cost.inner_bandwidth",
       [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.cost.inner_bandwidth = to_double(k, v); }},
      {"cost.outer_bandwidth",
       [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.cost.outer_bandwidth = to_double(k, v); }},
      {"cost.inner_latency",
       [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.cost.inner_latency = to_double(k, v); }},
      {"cost.outer_latency",
       [](TrainConfig& c, const auto& k, const auto& v) { c.runtime.cost.outer_latency = to_double(k, v); }},
      {"metrics_out", [](TrainConfig& c, const auto&, const auto& v) { c.metrics_out = v; }},
      {"summary_out", [](TrainConfig& c, const auto&, const auto& v) { c.summary_out = v; }},
      {"compare_exact", [](TrainConfig& c, const auto& k, const auto& v) { c.compare_exact = parse_bool(k, v); }},
  };
  return table;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", number);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", number);
    if (!out.emplace(key, value).second) throw ParseError("repeated key '" + key + "'", number);
  }
  return out;
}

std::map<std::string, std::string> load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::vector<std::string> apply_config(const std::map<std::string, std::string>& values, TrainConfig& cfg) {
  const auto& table = setters();
  for (const auto& [key, value] : values) {
    const auto it = table.find(key);
    if (it == table.end()) throw ArgumentError("unknown config key '" + key + "'");
    it->second(cfg, key, value);
  }
  std::vector<std::string> warnings;
  if (values.count("quant.bits") && !cfg.runtime.quant_enabled) {
    warnings.push_back("quant.bits is set but quant.enabled is off; payloads stay unquantized");
  }
  const bool cache_keys = std::any_of(values.begin(), values.end(), [](const auto& kv) {
    return kv.first.rfind("cache.", 0) == 0 && kv.first != "cache.enabled";
  });
  if (cache_keys && !cfg.runtime.cache_enabled) {
    warnings.push_back("cache.* settings given but cache.enabled is off; they have no effect");
  }
  return warnings;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, setter] : setters()) k.push_back(key);
    return k;
  }();
  return keys;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "off" || value == "no") return false;
  throw ArgumentError(key + ": expected on/off, got '" + value + "'");
}

Precision parse_precision(const std::string& value) {
  if (value == "f32" || value == "32" || value == "float32") return Precision::kF32;
  if (value == "f64" || value == "64" || value == "float64") return Precision::kF64;
  throw ArgumentError("precision: expected f32 or f64, got '" + value + "'");
}

OptimizerKind parse_optimizer(const std::string& value) {
  if (value == "sgd") return OptimizerKind::kSgd;
  if (value == "adam") return OptimizerKind::kAdam;
  throw ArgumentError("optimizer: expected sgd or adam, got '" + value + "'");
}

ScatterEncoding parse_scatter(const std::string& value) {
  if (value == "delta") return ScatterEncoding::kDelta;
  if (value == "full") return ScatterEncoding::kFull;
  throw ArgumentError("cache.scatter: expected delta or full, got '" + value + "'");
}

std::string to_string(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }
std::string to_string(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

}  // namespace cdfgnn
