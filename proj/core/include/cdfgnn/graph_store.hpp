#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cdfgnn/tensor_math.hpp"

namespace cdfgnn {

using VertexId = std::uint32_t;

/// Undirected edge. Stored once, in the orientation it was first seen.
struct Edge {
  VertexId u = 0;
  VertexId v = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Immutable undirected simple graph.
///
/// `edges()` keeps the deduplicated input order (the partitioner streams it);
/// `neighbors(v)` is the symmetric CSR view with ascending neighbor IDs.
class Graph {
 public:
  Graph() = default;

  /// Builds from an edge list. Duplicate pairs (in either orientation) are
  /// dropped keeping the first occurrence. Self-loops and out-of-range
  /// endpoints throw.
  static Graph from_edges(std::size_t num_vertices, std::span<const Edge> edges);

  std::size_t num_vertices() const noexcept { return degree_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }

  std::span<const Edge> edges() const noexcept { return edges_; }
  std::span<const VertexId> neighbors(VertexId v) const {
    return {adjacency_.data() + row_ptr_[v], row_ptr_[v + 1] - row_ptr_[v]};
  }
  std::uint32_t degree(VertexId v) const { return degree_[v]; }
  std::span<const std::uint32_t> degrees() const noexcept { return degree_; }

 private:
  std::vector<Edge> edges_;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<VertexId> adjacency_;
  std::vector<std::uint32_t> degree_;
};

/// Weight of edge (u, v) in D^{-1/2} A D^{-1/2}, computed in double and
/// rounded once to T so every code path sees identical weights.
template <typename T>
T normalized_weight(std::uint32_t deg_u, std::uint32_t deg_v) {
  return static_cast<T>(1.0 / std::sqrt(static_cast<double>(deg_u) * static_cast<double>(deg_v)));
}

/// D^{-1/2} A D^{-1/2} with the graph's sparsity; zero-degree rows are empty.
template <typename T>
CsrMatrix<T> normalize(const Graph& graph);

/// Per-vertex feature rows (H^0). Kept in float64 on disk load; cast per run.
struct FeatureMatrix {
  DenseMatrix<double> values;

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t dim() const noexcept { return values.cols(); }
};

enum class VertexRole : std::uint8_t { kNone = 0, kTrain = 1, kVal = 2, kTest = 3 };

struct LabelSet {
  std::vector<std::uint32_t> labels;
  std::vector<VertexRole> roles;
  std::uint32_t num_classes = 0;

  std::size_t count(VertexRole role) const;
  /// Throws BoundsError if a masked vertex has label >= num_classes.
  void validate(std::size_t num_vertices) const;
};

char role_char(VertexRole role);
VertexRole role_from_char(char c, std::size_t line);

// ---- text edge list -------------------------------------------------------

/// Reads "u v" lines, '#' comments and an optional "n <count>" header.
Graph load_edge_list(const std::filesystem::path& path);
Graph parse_edge_list(const std::string& text);
void write_edge_list(const Graph& graph, const std::filesystem::path& path);
std::string format_edge_list(const Graph& graph);

// ---- binary features ------------------------------------------------------

enum class FeatureDtype : std::uint8_t { kF32 = 0, kF64 = 1 };

/// Layout: "CDFG", u32 rows, u32 dim, u8 dtype, row-major little-endian values.
void write_features(const FeatureMatrix& features, const std::filesystem::path& path,
                    FeatureDtype dtype = FeatureDtype::kF32);
FeatureMatrix load_features(const std::filesystem::path& path);

// ---- labels / masks -------------------------------------------------------

/// One "label mask_char" pair per line, preceded by "k <num_classes>".
/// Mask chars: T train, V val, E test, N none.
void write_labels(const LabelSet& labels, const std::filesystem::path& path);
LabelSet load_labels(const std::filesystem::path& path);
LabelSet parse_labels(const std::string& text);

// ---- generators -----------------------------------------------------------

/// Preferential attachment: a clique on m+1 seed vertices, then each new
/// vertex links to m distinct existing vertices drawn proportionally to
/// degree. Always connected; heavy-tailed degrees.
Graph gen_power_law(std::size_t n, std::size_t edges_per_vertex, std::uint64_t seed);

struct PlantedDataset {
  FeatureMatrix features;
  LabelSet labels;
};

/// Planted classes on an existing graph. Labels start uniform and are then
/// smoothed twice by majority over the two-hop normalized propagation, so
/// classes are locally coherent in the graph. Features are a per-class unit
/// centroid plus N(0, noise^2) per coordinate. Masks split 60/20/20 by a
/// seeded shuffle.
PlantedDataset gen_planted_features(const Graph& graph, std::uint32_t num_classes, std::size_t dim,
                                    double noise, std::uint64_t seed);

}  // namespace cdfgnn
