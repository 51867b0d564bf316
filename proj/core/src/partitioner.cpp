#include "cdfgnn/partitioner.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cdfgnn/random.hpp"

namespace cdfgnn {

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Reads "count N" followed by N lines of two unsigned integers.
std::vector<std::pair<std::uint64_t, std::uint64_t>> read_pairs(const std::string& text,
                                                                 const std::string& name) {
  std::istringstream in(text);
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "count") throw IntegrityError(name + ": missing count header");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    if (!(in >> a >> b)) {
      throw IntegrityError(name + ": truncated after " + std::to_string(i) + " of " + std::to_string(count) +
                           " records");
    }
    out.emplace_back(a, b);
  }
  std::string extra;
  if (in >> extra) throw IntegrityError(name + ": trailing data after " + std::to_string(count) + " records");
  return out;
}

nlohmann::json stats_to_json(const PartitionStats& s) {
  return {{"replication_factor", s.replication_factor},
          {"edge_imbalance", s.edge_imbalance},
          {"vertex_imbalance", s.vertex_imbalance},
          {"inner_max", s.inner_max},
          {"outer_max", s.outer_max}};
}

}  // namespace

void ClusterShape::validate() const {
  if (num_hosts == 0 || gpus_per_host == 0) throw ArgumentError("cluster shape needs at least one worker");
}

PartitionerState::PartitionerState(std::size_t num_vertices, std::uint32_t num_workers, double a, double b,
                                   double g)
    : d_rep(num_vertices), h_rep(num_vertices), e_count(num_workers, 0), v_count(num_workers, 0),
      alpha(a), beta(b), gamma(g) {}

bool PartitionerState::on_worker(VertexId v, WorkerId w) const {
  const auto& reps = d_rep[v];
  return std::find(reps.begin(), reps.end(), w) != reps.end();
}

bool PartitionerState::on_host(VertexId v, std::uint32_t host) const {
  const auto& reps = h_rep[v];
  return std::find(reps.begin(), reps.end(), host) != reps.end();
}

void PartitionerState::assign(VertexId u, VertexId v, WorkerId w, const ClusterShape& cluster) {
  ++e_count[w];
  for (VertexId x : {u, v}) {
    if (!on_worker(x, w)) {
      d_rep[x].push_back(w);
      ++v_count[w];
    }
    const std::uint32_t host = cluster.host_of(w);
    if (!on_host(x, host)) h_rep[x].push_back(host);
  }
}

double eva(VertexId u, VertexId v, WorkerId i, const PartitionerState& state, const ClusterShape& cluster,
           std::size_t total_edges, std::size_t total_vertices) {
  const double p = cluster.num_workers();
  const std::uint32_t host = cluster.host_of(i);
  const double device_term = double(!state.on_worker(u, i)) + double(!state.on_worker(v, i));
  const double host_term = double(!state.on_host(u, host)) + double(!state.on_host(v, host));
  const double edge_term = static_cast<double>(state.e_count[i]) / (static_cast<double>(total_edges) / p);
  const double vertex_term = static_cast<double>(state.v_count[i]) / (static_cast<double>(total_vertices) / p);
  return (1.0 - state.gamma) * device_term + state.gamma * host_term + state.alpha * edge_term +
         state.beta * vertex_term;
}

std::optional<LocalId> WorkerPartition::local_of(VertexId global) const {
  auto it = std::lower_bound(local_to_global.begin(), local_to_global.end(), global);
  if (it == local_to_global.end() || *it != global) return std::nullopt;
  return static_cast<LocalId>(it - local_to_global.begin());
}

void PartitionPlan::rebuild_vertex_maps() {
  master_of.assign(num_vertices, kNoWorker);
  replicas.assign(num_vertices, {});
  for (WorkerId w = 0; w < workers.size(); ++w) {
    const auto& wp = workers[w];
    for (LocalId l = 0; l < wp.num_local(); ++l) {
      const VertexId g = wp.local_to_global[l];
      if (g >= num_vertices) throw IntegrityError("plan: global ID out of range on worker " + std::to_string(w));
      replicas[g].push_back(w);
      if (wp.is_master[l]) {
        if (master_of[g] != kNoWorker) {
          throw IntegrityError("plan: vertex " + std::to_string(g) + " has more than one master");
        }
        master_of[g] = w;
      }
    }
  }
}

void PartitionPlan::validate() const {
  if (workers.size() != cluster.num_workers()) throw IntegrityError("plan: worker count does not match cluster");
  std::size_t edge_total = 0;
  for (WorkerId w = 0; w < workers.size(); ++w) {
    const auto& wp = workers[w];
    if (wp.is_master.size() != wp.num_local()) throw IntegrityError("plan: master flag table size mismatch");
    for (std::size_t l = 1; l < wp.num_local(); ++l) {
      if (wp.local_to_global[l] <= wp.local_to_global[l - 1]) {
        throw IntegrityError("plan: local IDs not ascending in global ID on worker " + std::to_string(w));
      }
    }
    for (const LocalEdge& e : wp.edges) {
      if (e.a >= wp.num_local() || e.b >= wp.num_local() || e.a == e.b) {
        throw IntegrityError("plan: bad local edge on worker " + std::to_string(w));
      }
    }
    edge_total += wp.edges.size();
  }
  if (edge_total != num_edges) throw IntegrityError("plan: edges do not sum to num_edges");
  if (master_of.size() != num_vertices || replicas.size() != num_vertices) {
    throw IntegrityError("plan: vertex maps not built");
  }
  for (VertexId v = 0; v < num_vertices; ++v) {
    if (replicas[v].empty()) throw IntegrityError("plan: vertex " + std::to_string(v) + " has no replica");
    if (master_of[v] == kNoWorker) throw IntegrityError("plan: vertex " + std::to_string(v) + " has no master");
    if (std::find(replicas[v].begin(), replicas[v].end(), master_of[v]) == replicas[v].end()) {
      throw IntegrityError("plan: master of vertex " + std::to_string(v) + " holds no replica");
    }
  }
}

PartitionPlan plan_from_assignment(const Graph& graph, const ClusterShape& cluster,
                                   std::span<const Edge> edge_order, std::span<const WorkerId> assignment) {
  cluster.validate();
  if (edge_order.size() != assignment.size()) throw ArgumentError("assignment length does not match edge count");
  const std::uint32_t p = cluster.num_workers();
  const std::size_t n = graph.num_vertices();

  PartitionPlan plan;
  plan.cluster = cluster;
  plan.num_vertices = n;
  plan.num_edges = edge_order.size();
  plan.workers.resize(p);

  std::vector<WorkerId> first_worker(n, kNoWorker);
  std::vector<std::vector<VertexId>> members(p);
  for (std::size_t k = 0; k < edge_order.size(); ++k) {
    const WorkerId w = assignment[k];
    if (w >= p) throw ArgumentError("assignment names worker " + std::to_string(w));
    for (VertexId x : {edge_order[k].u, edge_order[k].v}) {
      if (first_worker[x] == kNoWorker) first_worker[x] = w;
      members[w].push_back(x);
    }
  }
  for (VertexId v = 0; v < n; ++v) {
    if (first_worker[v] == kNoWorker) {
      first_worker[v] = v % p;
      members[v % p].push_back(v);
    }
  }
  for (WorkerId w = 0; w < p; ++w) {
    auto& ids = members[w];
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    auto& wp = plan.workers[w];
    wp.local_to_global = ids;
    wp.is_master.resize(ids.size());
    for (std::size_t l = 0; l < ids.size(); ++l) wp.is_master[l] = first_worker[ids[l]] == w ? 1 : 0;
  }
  for (std::size_t k = 0; k < edge_order.size(); ++k) {
    auto& wp = plan.workers[assignment[k]];
    wp.edges.push_back({*wp.local_of(edge_order[k].u), *wp.local_of(edge_order[k].v)});
  }
  plan.rebuild_vertex_maps();
  plan.validate();
  return plan;
}

PartitionResult partition(const Graph& graph, const ClusterShape& cluster, const PartitionOptions& options) {
  cluster.validate();
  if (graph.num_edges() == 0) throw ArgumentError("partition: graph has no edges");
  const std::uint32_t p = cluster.num_workers();

  std::vector<Edge> order(graph.edges().begin(), graph.edges().end());
  if (options.edge_order_seed) {
    Rng rng(*options.edge_order_seed);
    rng.shuffle(order);
  }

  PartitionResult result;
  result.state = PartitionerState(graph.num_vertices(), p, options.alpha, options.beta, options.gamma);
  std::vector<WorkerId> assignment(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Edge& e = order[k];
    WorkerId best = 0;
    double best_score = eva(e.u, e.v, 0, result.state, cluster, graph.num_edges(), graph.num_vertices());
    for (WorkerId i = 1; i < p; ++i) {
      const double score = eva(e.u, e.v, i, result.state, cluster, graph.num_edges(), graph.num_vertices());
      if (score < best_score) {
        best = i;
        best_score = score;
      }
    }
    assignment[k] = best;
    result.state.assign(e.u, e.v, best, cluster);
  }
  result.plan = plan_from_assignment(graph, cluster, order, assignment);
  return result;
}

PartitionStats compute_stats(const PartitionPlan& plan) {
  PartitionStats s;
  const std::uint32_t p = plan.cluster.num_workers();
  s.inner_per_worker.assign(p, 0);
  s.outer_per_worker.assign(p, 0);

  std::size_t replica_total = 0;
  std::size_t max_local = 0;
  std::size_t max_edges = 0;
  for (const auto& wp : plan.workers) {
    replica_total += wp.num_local();
    max_local = std::max(max_local, wp.num_local());
    max_edges = std::max(max_edges, wp.edges.size());
  }
  if (plan.num_vertices > 0) s.replication_factor = double(replica_total) / double(plan.num_vertices);
  if (plan.num_edges > 0) s.edge_imbalance = double(max_edges) / (double(plan.num_edges) / p);
  if (replica_total > 0) s.vertex_imbalance = double(max_local) / (double(replica_total) / p);

  for (VertexId v = 0; v < plan.num_vertices; ++v) {
    const WorkerId master = plan.master_of[v];
    for (WorkerId mirror : plan.replicas[v]) {
      if (mirror == master) continue;
      // Gather is sent by the mirror, scatter by the master.
      const bool same_host = plan.cluster.host_of(mirror) == plan.cluster.host_of(master);
      auto& counts = same_host ? s.inner_per_worker : s.outer_per_worker;
      ++counts[mirror];
      ++counts[master];
    }
  }
  s.inner_max = *std::max_element(s.inner_per_worker.begin(), s.inner_per_worker.end());
  s.outer_max = *std::max_element(s.outer_per_worker.begin(), s.outer_per_worker.end());
  return s;
}

void write_plan(const PartitionPlan& plan, const std::filesystem::path& dir) {
  plan.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create plan directory " + dir.string() + ": " + ec.message());

  nlohmann::json manifest;
  manifest["format"] = "cdfgnn-plan";
  manifest["version"] = kPlanFormatVersion;
  manifest["num_hosts"] = plan.cluster.num_hosts;
  manifest["gpus_per_host"] = plan.cluster.gpus_per_host;
  manifest["num_vertices"] = plan.num_vertices;
  manifest["num_edges"] = plan.num_edges;
  manifest["stats"] = stats_to_json(compute_stats(plan));
  manifest["workers"] = nlohmann::json::array();

  for (WorkerId w = 0; w < plan.workers.size(); ++w) {
    const auto& wp = plan.workers[w];
    std::string edges = "count " + std::to_string(wp.edges.size()) + "\n";
    for (const auto& e : wp.edges) edges += std::to_string(e.a) + " " + std::to_string(e.b) + "\n";
    std::string map = "count " + std::to_string(wp.num_local()) + "\n";
    for (std::size_t l = 0; l < wp.num_local(); ++l) {
      map += std::to_string(wp.local_to_global[l]) + " " + std::to_string(int(wp.is_master[l])) + "\n";
    }
    const std::string edges_name = "worker_" + std::to_string(w) + ".edges";
    const std::string map_name = "worker_" + std::to_string(w) + ".map";
    write_text(dir / edges_name, edges);
    write_text(dir / map_name, map);
    manifest["workers"].push_back({{"edges_file", edges_name},
                                   {"map_file", map_name},
                                   {"num_edges", wp.edges.size()},
                                   {"num_local", wp.num_local()},
                                   {"edges_fnv1a", fnv1a(edges)},
                                   {"map_fnv1a", fnv1a(map)}});
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

PartitionPlan load_plan(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) throw IoError("missing " + manifest_path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("manifest.json: " + std::string(e.what()));
  }

  PartitionPlan plan;
  try {
    if (manifest.value("format", "") != "cdfgnn-plan") throw SchemaError("manifest.json: not a cdfgnn plan");
    if (manifest.at("version").get<int>() != kPlanFormatVersion) {
      throw SchemaError("manifest.json: plan version " + manifest.at("version").dump() + ", expected " +
                        std::to_string(kPlanFormatVersion));
    }
    plan.cluster.num_hosts = manifest.at("num_hosts").get<std::uint32_t>();
    plan.cluster.gpus_per_host = manifest.at("gpus_per_host").get<std::uint32_t>();
    plan.cluster.validate();
    plan.num_vertices = manifest.at("num_vertices").get<std::size_t>();
    plan.num_edges = manifest.at("num_edges").get<std::size_t>();
    const auto& workers = manifest.at("workers");
    if (workers.size() != plan.cluster.num_workers()) throw IntegrityError("manifest.json: worker count mismatch");

    for (const auto& entry : workers) {
      const auto edges_path = dir / entry.at("edges_file").get<std::string>();
      const auto map_path = dir / entry.at("map_file").get<std::string>();
      if (!std::filesystem::exists(edges_path)) throw IoError("missing " + edges_path.string());
      if (!std::filesystem::exists(map_path)) throw IoError("missing " + map_path.string());
      const std::string edges_text = read_text(edges_path);
      const std::string map_text = read_text(map_path);
      const auto edge_pairs = read_pairs(edges_text, edges_path.filename().string());
      const auto map_pairs = read_pairs(map_text, map_path.filename().string());
      if (edge_pairs.size() != entry.at("num_edges").get<std::size_t>() ||
          map_pairs.size() != entry.at("num_local").get<std::size_t>()) {
        throw IntegrityError("manifest.json: record counts disagree with worker files");
      }
      if (fnv1a(edges_text) != entry.at("edges_fnv1a").get<std::uint64_t>() ||
          fnv1a(map_text) != entry.at("map_fnv1a").get<std::uint64_t>()) {
        throw IntegrityError("checksum mismatch in " + edges_path.filename().string() + " or " +
                             map_path.filename().string());
      }
      WorkerPartition wp;
      for (const auto& [g, flag] : map_pairs) {
        if (flag > 1) throw IntegrityError(map_path.filename().string() + ": master flag must be 0 or 1");
        wp.local_to_global.push_back(static_cast<VertexId>(g));
        wp.is_master.push_back(static_cast<std::uint8_t>(flag));
      }
      for (const auto& [a, b] : edge_pairs) wp.edges.push_back({static_cast<LocalId>(a), static_cast<LocalId>(b)});
      plan.workers.push_back(std::move(wp));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("manifest.json: " + std::string(e.what()));
  }
  plan.rebuild_vertex_maps();
  plan.validate();
  return plan;
}

}  // namespace cdfgnn
