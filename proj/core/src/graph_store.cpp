#include "cdfgnn/graph_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "cdfgnn/random.hpp"

namespace cdfgnn {

namespace {

std::uint64_t edge_key(VertexId a, VertexId b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << data;
  if (!out) throw IoError("write failed for " + path.string());
}

// Splits a line into whitespace-separated tokens.
std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <typename Int>
Int parse_uint(std::string_view token, std::size_t line, const char* what) {
  Int value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError(std::string("expected non-negative integer ") + what + ", got '" +
                         std::string(token) + "'",
                     line);
  }
  return value;
}

template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    fn(std::string_view(text).substr(pos, end - pos), line_no);
    if (end == text.size()) break;
    pos = end + 1;
  }
}

template <typename T>
void put_le(std::string& out, T value) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
  std::array<char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace

Graph Graph::from_edges(std::size_t num_vertices, std::span<const Edge> edges) {
  if (num_vertices > std::numeric_limits<VertexId>::max()) {
    throw ArgumentError("graph too large for 32-bit vertex IDs");
  }
  Graph g;
  g.degree_.assign(num_vertices, 0);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(edges.size() * 2);
  for (const Edge& e : edges) {
    if (e.u >= num_vertices || e.v >= num_vertices) {
      throw BoundsError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                        ") has endpoint >= num_vertices " + std::to_string(num_vertices));
    }
    if (e.u == e.v) throw ArgumentError("self-loop on vertex " + std::to_string(e.u));
    if (!seen.insert(edge_key(e.u, e.v)).second) continue;
    g.edges_.push_back(e);
    ++g.degree_[e.u];
    ++g.degree_[e.v];
  }

  g.row_ptr_.assign(num_vertices + 1, 0);
  for (std::size_t v = 0; v < num_vertices; ++v) g.row_ptr_[v + 1] = g.row_ptr_[v] + g.degree_[v];
  g.adjacency_.resize(g.row_ptr_.back());
  std::vector<std::size_t> cursor(g.row_ptr_.begin(), g.row_ptr_.end() - 1);
  for (const Edge& e : g.edges_) {
    g.adjacency_[cursor[e.u]++] = e.v;
    g.adjacency_[cursor[e.v]++] = e.u;
  }
  for (std::size_t v = 0; v < num_vertices; ++v) {
    std::sort(g.adjacency_.begin() + static_cast<std::ptrdiff_t>(g.row_ptr_[v]),
              g.adjacency_.begin() + static_cast<std::ptrdiff_t>(g.row_ptr_[v + 1]));
  }
  return g;
}

template <typename T>
CsrMatrix<T> normalize(const Graph& graph) {
  CsrMatrix<T> out;
  const std::size_t n = graph.num_vertices();
  out.rows = n;
  out.cols = n;
  out.row_ptr.assign(n + 1, 0);
  out.col_idx.reserve(2 * graph.num_edges());
  out.values.reserve(2 * graph.num_edges());
  for (VertexId v = 0; v < n; ++v) {
    for (VertexId u : graph.neighbors(v)) {
      out.col_idx.push_back(u);
      out.values.push_back(normalized_weight<T>(graph.degree(v), graph.degree(u)));
    }
    out.row_ptr[v + 1] = out.col_idx.size();
  }
  return out;
}

template CsrMatrix<float> normalize<float>(const Graph&);
template CsrMatrix<double> normalize<double>(const Graph&);

// ---- labels ---------------------------------------------------------------

std::size_t LabelSet::count(VertexRole role) const {
  return static_cast<std::size_t>(std::count(roles.begin(), roles.end(), role));
}

void LabelSet::validate(std::size_t num_vertices) const {
  if (labels.size() != num_vertices || roles.size() != num_vertices) {
    throw IntegrityError("label set covers " + std::to_string(labels.size()) +
                         " vertices, graph has " + std::to_string(num_vertices));
  }
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (roles[v] != VertexRole::kNone && labels[v] >= num_classes) {
      throw BoundsError("vertex " + std::to_string(v) + " label " + std::to_string(labels[v]) +
                        " >= num_classes " + std::to_string(num_classes));
    }
  }
}

char role_char(VertexRole role) {
  switch (role) {
    case VertexRole::kTrain: return 'T';
    case VertexRole::kVal: return 'V';
    case VertexRole::kTest: return 'E';
    case VertexRole::kNone: break;
  }
  return 'N';
}

VertexRole role_from_char(char c, std::size_t line) {
  switch (c) {
    case 'T': return VertexRole::kTrain;
    case 'V': return VertexRole::kVal;
    case 'E': return VertexRole::kTest;
    case 'N': return VertexRole::kNone;
    default: break;
  }
  throw ParseError(std::string("unknown mask char '") + c + "'", line);
}

// ---- edge list ------------------------------------------------------------

Graph parse_edge_list(const std::string& text) {
  std::vector<Edge> edges;
  std::size_t declared = 0;
  bool have_header = false;
  std::size_t max_id = 0;

  for_each_line(text, [&](std::string_view raw, std::size_t line) {
    const std::size_t hash = raw.find('#');
    const auto tokens = tokenize(hash == std::string_view::npos ? raw : raw.substr(0, hash));
    if (tokens.empty()) return;
    if (tokens[0] == "n") {
      if (tokens.size() != 2) throw ParseError("header must be 'n <count>'", line);
      if (have_header) throw ParseError("duplicate 'n' header", line);
      if (!edges.empty()) throw ParseError("'n' header must precede edges", line);
      declared = parse_uint<std::size_t>(tokens[1], line, "vertex count");
      have_header = true;
      return;
    }
    if (tokens.size() != 2) throw ParseError("expected 'u v'", line);
    const auto u = parse_uint<VertexId>(tokens[0], line, "endpoint");
    const auto v = parse_uint<VertexId>(tokens[1], line, "endpoint");
    if (u == v) throw ParseError("self-loop on vertex " + std::to_string(u), line);
    if (have_header && (u >= declared || v >= declared)) {
      throw BoundsError("line " + std::to_string(line) + ": endpoint >= declared n " +
                        std::to_string(declared));
    }
    max_id = std::max<std::size_t>(max_id, std::max(u, v));
    edges.push_back({u, v});
  });

  const std::size_t n = have_header ? declared : (edges.empty() ? 0 : max_id + 1);
  return Graph::from_edges(n, edges);
}

Graph load_edge_list(const std::filesystem::path& path) { return parse_edge_list(read_file(path)); }

std::string format_edge_list(const Graph& graph) {
  std::string out = "n " + std::to_string(graph.num_vertices()) + "\n";
  for (const Edge& e : graph.edges()) {
    out += std::to_string(e.u);
    out += ' ';
    out += std::to_string(e.v);
    out += '\n';
  }
  return out;
}

void write_edge_list(const Graph& graph, const std::filesystem::path& path) {
  write_file(path, format_edge_list(graph));
}

// ---- features -------------------------------------------------------------

void write_features(const FeatureMatrix& features, const std::filesystem::path& path,
                    FeatureDtype dtype) {
  std::string out = "CDFG";
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(features.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(features.dim()));
  out.push_back(static_cast<char>(dtype));
  for (double v : features.values.values()) {
    if (dtype == FeatureDtype::kF32) {
      put_le<float>(out, static_cast<float>(v));
    } else {
      put_le<double>(out, v);
    }
  }
  write_file(path, out);
}

FeatureMatrix load_features(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  constexpr std::size_t kHeader = 4 + 4 + 4 + 1;
  if (data.size() < kHeader || data.compare(0, 4, "CDFG") != 0) {
    throw IntegrityError(path.string() + ": missing CDFG feature header");
  }
  const auto rows = get_le<std::uint32_t>(data, 4);
  const auto dim = get_le<std::uint32_t>(data, 8);
  const auto dtype = static_cast<std::uint8_t>(data[12]);
  if (dtype > 1) throw IntegrityError(path.string() + ": unknown dtype " + std::to_string(dtype));
  const std::size_t width = dtype == 0 ? 4 : 8;
  const std::size_t count = static_cast<std::size_t>(rows) * dim;
  if (data.size() != kHeader + count * width) {
    throw IntegrityError(path.string() + ": expected " + std::to_string(kHeader + count * width) +
                         " bytes, found " + std::to_string(data.size()));
  }
  FeatureMatrix out{DenseMatrix<double>(rows, dim)};
  auto dst = out.values.values();
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t off = kHeader + i * width;
    dst[i] = dtype == 0 ? static_cast<double>(get_le<float>(data, off)) : get_le<double>(data, off);
    if (!std::isfinite(dst[i])) {
      throw IntegrityError(path.string() + ": non-finite feature at index " + std::to_string(i));
    }
  }
  return out;
}

// ---- labels file ----------------------------------------------------------

LabelSet parse_labels(const std::string& text) {
  LabelSet out;
  bool have_header = false;
  for_each_line(text, [&](std::string_view raw, std::size_t line) {
    const std::size_t hash = raw.find('#');
    const auto tokens = tokenize(hash == std::string_view::npos ? raw : raw.substr(0, hash));
    if (tokens.empty()) return;
    if (tokens[0] == "k") {
      if (tokens.size() != 2 || have_header || !out.labels.empty()) {
        throw ParseError("'k <num_classes>' must appear once before labels", line);
      }
      out.num_classes = parse_uint<std::uint32_t>(tokens[1], line, "class count");
      have_header = true;
      return;
    }
    if (tokens.size() != 2 || tokens[1].size() != 1) throw ParseError("expected 'label mask'", line);
    out.labels.push_back(parse_uint<std::uint32_t>(tokens[0], line, "label"));
    out.roles.push_back(role_from_char(tokens[1][0], line));
  });
  if (!have_header) {
    std::uint32_t max_label = 0;
    for (auto l : out.labels) max_label = std::max(max_label, l);
    out.num_classes = out.labels.empty() ? 0 : max_label + 1;
  }
  out.validate(out.labels.size());
  return out;
}

LabelSet load_labels(const std::filesystem::path& path) { return parse_labels(read_file(path)); }

void write_labels(const LabelSet& labels, const std::filesystem::path& path) {
  std::string out = "k " + std::to_string(labels.num_classes) + "\n";
  for (std::size_t v = 0; v < labels.labels.size(); ++v) {
    out += std::to_string(labels.labels[v]);
    out += ' ';
    out += role_char(labels.roles[v]);
    out += '\n';
  }
  write_file(path, out);
}

// ---- generators -----------------------------------------------------------

Graph gen_power_law(std::size_t n, std::size_t edges_per_vertex, std::uint64_t seed) {
  const std::size_t m = edges_per_vertex;
  if (m == 0) throw ArgumentError("gen_power_law: edges_per_vertex must be positive");
  if (n < m + 1) {
    throw ArgumentError("gen_power_law: n = " + std::to_string(n) + " must be >= edges_per_vertex + 1");
  }
  Rng rng(seed);
  std::vector<Edge> edges;
  edges.reserve(m * (m + 1) / 2 + (n - m - 1) * m);
  // Every endpoint occurrence appears once here, so a uniform pick is a
  // degree-proportional pick.
  std::vector<VertexId> endpoints;
  endpoints.reserve(2 * edges.capacity());

  for (VertexId v = 1; v <= m; ++v) {
    for (VertexId u = 0; u < v; ++u) {
      edges.push_back({u, v});
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  }
  std::vector<VertexId> chosen;
  for (std::size_t v = m + 1; v < n; ++v) {
    chosen.clear();
    while (chosen.size() < m) {
      const VertexId target = endpoints[rng.uniform_index(endpoints.size())];
      if (std::find(chosen.begin(), chosen.end(), target) == chosen.end()) chosen.push_back(target);
    }
    for (VertexId u : chosen) {
      edges.push_back({u, static_cast<VertexId>(v)});
      endpoints.push_back(u);
      endpoints.push_back(static_cast<VertexId>(v));
    }
  }
  return Graph::from_edges(n, edges);
}

PlantedDataset gen_planted_features(const Graph& graph, std::uint32_t num_classes, std::size_t dim,
                                    double noise, std::uint64_t seed) {
  if (num_classes < 2) throw ArgumentError("gen_planted_features: num_classes must be >= 2");
  if (!(noise >= 0.0 && noise < 1.0)) throw ArgumentError("gen_planted_features: noise must be in [0,1)");
  if (dim == 0) throw ArgumentError("gen_planted_features: dim must be positive");

  const std::size_t n = graph.num_vertices();
  Rng rng(seed);
  PlantedDataset out;
  out.labels.num_classes = num_classes;
  out.labels.labels.resize(n);
  for (auto& l : out.labels.labels) l = static_cast<std::uint32_t>(rng.uniform_index(num_classes));

  const CsrMatrix<double> adj = normalize<double>(graph);
  constexpr int kSmoothingRounds = 2;
  for (int round = 0; round < kSmoothingRounds; ++round) {
    DenseMatrix<double> onehot(n, num_classes);
    for (std::size_t v = 0; v < n; ++v) onehot(v, out.labels.labels[v]) = 1.0;
    const DenseMatrix<double> two_hop = spmm(adj, spmm(adj, onehot));
    for (std::size_t v = 0; v < n; ++v) {
      auto scores = two_hop.row(v);
      // Ties keep the current label, otherwise the lowest class wins.
      const std::uint32_t current = out.labels.labels[v];
      const double peak = *std::max_element(scores.begin(), scores.end());
      if (scores[current] == peak) continue;
      std::uint32_t best = 0;
      while (scores[best] != peak) ++best;
      out.labels.labels[v] = best;
    }
  }

  DenseMatrix<double> centroids(num_classes, dim);
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    auto row = centroids.row(c);
    double norm2 = 0.0;
    for (double& x : row) {
      x = rng.normal();
      norm2 += x * x;
    }
    const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
    for (double& x : row) x *= inv;
  }

  out.features.values = DenseMatrix<double>(n, dim);
  for (std::size_t v = 0; v < n; ++v) {
    auto dst = out.features.values.row(v);
    auto centroid = centroids.row(out.labels.labels[v]);
    for (std::size_t c = 0; c < dim; ++c) dst[c] = centroid[c] + (noise > 0.0 ? noise * rng.normal() : 0.0);
  }

  std::vector<VertexId> order(n);
  for (std::size_t v = 0; v < n; ++v) order[v] = static_cast<VertexId>(v);
  rng.shuffle(order);
  const std::size_t num_train = n * 6 / 10;
  const std::size_t num_val = n * 2 / 10;
  out.labels.roles.assign(n, VertexRole::kTest);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < num_train) {
      out.labels.roles[order[i]] = VertexRole::kTrain;
    } else if (i < num_train + num_val) {
      out.labels.roles[order[i]] = VertexRole::kVal;
    }
  }
  return out;
}

}  // namespace cdfgnn
