#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <unistd.h>
#include <vector>

#include "cdfgnn/graph_store.hpp"
#include "cdfgnn/random.hpp"
#include "cdfgnn/tensor_math.hpp"

namespace testing_support {

inline cdfgnn::Graph graph_of(std::size_t n, std::initializer_list<std::pair<unsigned, unsigned>> pairs) {
  std::vector<cdfgnn::Edge> edges;
  for (auto [u, v] : pairs) edges.push_back({u, v});
  return cdfgnn::Graph::from_edges(n, edges);
}

/// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("cdfgnn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline cdfgnn::DenseMatrix<double> random_matrix(cdfgnn::Rng& rng, std::size_t r, std::size_t c, double lo = -1.0,
                                                 double hi = 1.0) {
  cdfgnn::DenseMatrix<double> m(r, c);
  for (auto& x : m.values()) x = rng.uniform(lo, hi);
  return m;
}

/// max|a-b| / max|b|.
inline double rel_err(const cdfgnn::DenseMatrix<double>& a, const cdfgnn::DenseMatrix<double>& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a.values()[i] - b.values()[i]));
    den = std::max(den, std::abs(b.values()[i]));
  }
  return den == 0.0 ? num : num / den;
}

}  // namespace testing_support
