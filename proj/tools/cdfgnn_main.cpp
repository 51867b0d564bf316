// cdfgnn: generate graphs, partition them, train, and compare runs.

#include <algorithm>
#include <cctype>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdfgnn/config.hpp"
#include "cdfgnn/error.hpp"
#include "cdfgnn/experiment.hpp"
#include "cdfgnn/graph_store.hpp"
#include "cdfgnn/partitioner.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

std::string env_name(const std::string& flag) {
  std::string out = "CDFGNN_";
  for (char c : flag) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

template <typename V>
CLI::Option* add(CLI::App* app, const std::string& flag, V& target, const std::string& help) {
  return app->add_option("--" + flag, target, help)->envname(env_name(flag));
}

/// Flags of train/oracle-train that map one-to-one onto config keys.
struct KeyedFlags {
  std::map<std::string, std::string> values;
  std::vector<std::pair<CLI::Option*, std::string>> bound;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    bound.emplace_back(::add(app, flag, values[key], help), key);
  }

  std::map<std::string, std::string> given() const {
    std::map<std::string, std::string> out;
    for (const auto& [opt, key] : bound) {
      if (opt->count() > 0) out[key] = values.at(key);
    }
    return out;
  }
};

void add_training_flags(CLI::App* app, KeyedFlags& f, bool distributed) {
  f.add(app, "graph", "graph", "edge list file");
  f.add(app, "features", "features", "binary feature file");
  f.add(app, "labels", "labels", "label/mask file");
  f.add(app, "epochs", "epochs", "number of full-batch epochs");
  f.add(app, "lr", "lr", "learning rate");
  f.add(app, "optimizer", "optimizer", "sgd or adam");
  f.add(app, "precision", "precision", "f32 or f64");
  f.add(app, "seed", "seed", "weight initialisation seed");
  f.add(app, "hidden", "hidden", "hidden width");
  f.add(app, "layers", "layers", "number of GCN layers");
  f.add(app, "metrics-out", "metrics_out", "metrics CSV path");
  if (!distributed) return;
  f.add(app, "plan", "plan", "load this partition plan instead of partitioning");
  f.add(app, "hosts", "hosts", "number of hosts");
  f.add(app, "gpus-per-host", "gpus_per_host", "workers per host");
  f.add(app, "alpha", "alpha", "edge balance weight");
  f.add(app, "beta", "beta", "vertex balance weight");
  f.add(app, "gamma", "gamma", "host locality weight");
  f.add(app, "partition-seed", "partition.seed", "shuffle the edge stream with this seed");
  f.add(app, "cache", "cache.enabled", "adaptive vertex cache on/off");
  f.add(app, "adaptive", "cache.adaptive", "adapt the threshold each epoch on/off");
  f.add(app, "eps-init", "cache.eps_init", "initial cache threshold");
  f.add(app, "mu1", "cache.mu1", "accuracy drop band");
  f.add(app, "mu2", "cache.mu2", "accuracy rise band");
  f.add(app, "nu1", "cache.nu1", "threshold upper bound");
  f.add(app, "nu2", "cache.nu2", "threshold lower bound");
  f.add(app, "xi", "cache.xi", "threshold step cap");
  f.add(app, "lambda1", "cache.lambda1", "threshold growth factor");
  f.add(app, "lambda2", "cache.lambda2", "threshold shrink factor");
  f.add(app, "scatter", "cache.scatter", "scatter encoding: delta or full");
  f.add(app, "quant", "quant.enabled", "quantize vertex payloads on/off");
  f.add(app, "quant-bits", "quant.bits", "quantization bits (1-16)");
  f.add(app, "update-per-layer", "update_per_layer", "apply each layer's update during backprop on/off");
  f.add(app, "record-wall", "record_wall", "record wall-clock seconds in the CSV on/off");
  f.add(app, "summary-out", "summary_out", "JSON summary path");
}

cdfgnn::TrainConfig build_config(const std::string& config_path, const KeyedFlags& flags, int p,
                                 bool compare_exact, std::vector<std::string>& warnings) {
  cdfgnn::TrainConfig cfg;
  std::map<std::string, std::string> values;
  if (!config_path.empty()) values = cdfgnn::load_config_file(config_path);
  for (const auto& [key, value] : flags.given()) values[key] = value;
  warnings = cdfgnn::apply_config(values, cfg);
  if (p > 0) {
    if (!values.count("hosts")) cfg.cluster.num_hosts = p % 2 == 0 ? 2 : 1;
    if (p % cfg.cluster.num_hosts != 0) {
      throw cdfgnn::ArgumentError("--p " + std::to_string(p) + " is not a multiple of --hosts " +
                                  std::to_string(cfg.cluster.num_hosts));
    }
    cfg.cluster.gpus_per_host = static_cast<std::uint32_t>(p) / cfg.cluster.num_hosts;
  }
  if (compare_exact) cfg.compare_exact = true;
  return cfg;
}

int run(int argc, char** argv) {
  CLI::App app{"Cache-based distributed full-batch GCN training simulator"};
  app.require_subcommand(1);

  // gen-graph
  auto* gen = app.add_subcommand("gen-graph", "generate a power-law graph with planted classes");
  std::size_t n = 2000;
  std::size_t m = 3;
  std::uint32_t classes = 4;
  std::size_t dim = 32;
  double noise = 0.1;
  std::uint64_t gen_seed = 11;
  std::string prefix;
  add(gen, "n", n, "vertex count");
  add(gen, "m", m, "edges per new vertex");
  add(gen, "classes", classes, "number of classes");
  add(gen, "dim", dim, "feature dimension");
  add(gen, "noise", noise, "feature noise in [0,1)");
  add(gen, "seed", gen_seed, "generator seed");
  add(gen, "out-prefix", prefix, "writes <prefix>.edges, <prefix>.feat, <prefix>.labels")->required();

  // partition
  auto* part = app.add_subcommand("partition", "vertex-cut partition a graph and write the plan");
  std::string part_graph;
  std::string part_out;
  cdfgnn::ClusterShape shape;
  cdfgnn::PartitionOptions popts;
  std::uint64_t part_seed = 0;
  add(part, "graph", part_graph, "edge list file")->required();
  add(part, "hosts", shape.num_hosts, "number of hosts");
  add(part, "gpus-per-host", shape.gpus_per_host, "workers per host");
  add(part, "alpha", popts.alpha, "edge balance weight");
  add(part, "beta", popts.beta, "vertex balance weight");
  add(part, "gamma", popts.gamma, "host locality weight");
  auto* seed_opt = add(part, "seed", part_seed, "shuffle the edge stream with this seed");
  add(part, "out", part_out, "plan directory")->required();

  // train
  auto* train = app.add_subcommand("train", "distributed training on the simulated cluster");
  KeyedFlags train_flags;
  add_training_flags(train, train_flags, true);
  std::string train_config;
  int train_p = 0;
  bool compare_exact = false;
  add(train, "config", train_config, "key=value config file (flags override it)");
  add(train, "p", train_p, "total workers; split over 2 hosts when even unless --hosts is given");
  train->add_flag("--compare-exact", compare_exact, "also run cache-off/quant-off and report the reduction")
      ->envname(env_name("compare-exact"));

  // oracle-train
  auto* oracle = app.add_subcommand("oracle-train", "single-device exact training");
  KeyedFlags oracle_flags;
  add_training_flags(oracle, oracle_flags, false);
  std::string oracle_config;
  add(oracle, "config", oracle_config, "key=value config file (flags override it)");

  // compare
  auto* cmp = app.add_subcommand("compare", "compare two metrics CSV files");
  std::string run_a;
  std::string run_b;
  cmp->add_option("run_a", run_a, "baseline metrics CSV")->required();
  cmp->add_option("run_b", run_b, "candidate metrics CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (gen->parsed()) {
    const auto graph = cdfgnn::gen_power_law(n, m, gen_seed);
    const auto data = cdfgnn::gen_planted_features(graph, classes, dim, noise, gen_seed);
    cdfgnn::write_edge_list(graph, prefix + ".edges");
    cdfgnn::write_features(data.features, prefix + ".feat", cdfgnn::FeatureDtype::kF64);
    cdfgnn::write_labels(data.labels, prefix + ".labels");
    std::cout << "wrote " << prefix << ".{edges,feat,labels}: " << graph.num_vertices() << " vertices, "
              << graph.num_edges() << " edges\n";
    return 0;
  }

  if (part->parsed()) {
    if (seed_opt->count() > 0) popts.edge_order_seed = part_seed;
    const auto graph = cdfgnn::load_edge_list(part_graph);
    const auto result = cdfgnn::partition(graph, shape, popts);
    cdfgnn::write_plan(result.plan, part_out);
    const auto s = cdfgnn::compute_stats(result.plan);
    nlohmann::json j = {{"workers", shape.num_workers()},
                        {"replication_factor", s.replication_factor},
                        {"edge_imbalance", s.edge_imbalance},
                        {"vertex_imbalance", s.vertex_imbalance},
                        {"inner_max", s.inner_max},
                        {"outer_max", s.outer_max}};
    std::cout << j.dump(2) << "\n";
    return 0;
  }

  std::vector<std::string> warnings;
  if (train->parsed()) {
    auto cfg = build_config(train_config, train_flags, train_p, compare_exact, warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    auto summary = cdfgnn::cmd_train(cfg, std::cerr);
    summary.warnings = warnings;
    const auto json = cdfgnn::summary_to_json(cfg, summary);
    if (cfg.summary_out.empty()) std::cout << json;
    return 0;
  }

  if (oracle->parsed()) {
    auto cfg = build_config(oracle_config, oracle_flags, 0, false, warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    cdfgnn::cmd_oracle_train(cfg, std::cerr);
    return 0;
  }

  if (cmp->parsed()) {
    std::cout << cdfgnn::format_compare_report(cdfgnn::cmd_compare(run_a, run_b));
    return 0;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const cdfgnn::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const cdfgnn::ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const cdfgnn::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
