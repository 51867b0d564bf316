#include "cdfgnn/metrics_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cdfgnn/error.hpp"

namespace cdfgnn {

namespace {

std::string real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double ratio_reduction(double a, double b) { return a == 0.0 ? 0.0 : 1.0 - b / a; }

}  // namespace

std::vector<std::string> metrics_columns(std::size_t num_layers) {
  std::vector<std::string> cols{"epoch", "loss", "train_acc", "val_acc", "eps"};
  for (std::size_t l = 1; l <= num_layers; ++l) cols.push_back("fwd_sends_l" + std::to_string(l));
  for (std::size_t l = 1; l <= num_layers; ++l) cols.push_back("bwd_sends_l" + std::to_string(l));
  for (const char* c : {"inner_bytes", "outer_bytes", "modeled_comm_s", "wall_s"}) cols.emplace_back(c);
  return cols;
}

std::string format_metrics_csv(const std::vector<EpochMetrics>& rows, std::size_t num_layers) {
  std::string out = "# cdfgnn-metrics v" + std::to_string(kMetricsSchemaVersion) + " layers=" +
                    std::to_string(num_layers) + "\n";
  const auto cols = metrics_columns(num_layers);
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  for (const auto& m : rows) {
    if (m.fwd_sends.size() != num_layers || m.bwd_sends.size() != num_layers) {
      throw ShapeError("metrics row has " + std::to_string(m.fwd_sends.size()) + " layers, expected " +
                       std::to_string(num_layers));
    }
    out += std::to_string(m.epoch) + "," + real(m.loss) + "," + real(m.train_acc) + "," + real(m.val_acc) + "," +
           real(m.eps);
    for (auto s : m.fwd_sends) out += "," + std::to_string(s);
    for (auto s : m.bwd_sends) out += "," + std::to_string(s);
    out += "," + std::to_string(m.inner_bytes) + "," + std::to_string(m.outer_bytes) + "," + real(m.modeled_comm_s) +
           "," + real(m.wall_s) + "\n";
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& rows,
                       std::size_t num_layers) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write metrics " + path.string());
  out << format_metrics_csv(rows, num_layers);
  if (!out) throw IoError("write failed for " + path.string());
}

std::size_t MetricsTable::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw SchemaError("metrics table has no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

double MetricsTable::sends(std::size_t row) const {
  double total = 0.0;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].rfind("fwd_sends_", 0) == 0 || columns[c].rfind("bwd_sends_", 0) == 0) total += rows[row][c];
  }
  return total;
}

MetricsTable parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("metrics: empty file");
  const std::string prefix = "# cdfgnn-metrics v";
  if (line.rfind(prefix, 0) != 0) throw SchemaError("metrics: missing schema line");
  int version = 0;
  std::size_t layers = 0;
  if (std::sscanf(line.c_str() + prefix.size(), "%d layers=%zu", &version, &layers) != 2) {
    throw SchemaError("metrics: malformed schema line '" + line + "'");
  }
  if (version != kMetricsSchemaVersion) {
    throw SchemaError("metrics: schema v" + std::to_string(version) + ", expected v" +
                      std::to_string(kMetricsSchemaVersion));
  }
  MetricsTable t;
  t.num_layers = layers;
  if (!std::getline(in, line)) throw SchemaError("metrics: missing header row");
  t.columns = split(line, ',');
  if (t.columns != metrics_columns(layers)) throw SchemaError("metrics: header does not match " +
                                                              std::to_string(layers) + "-layer schema");
  std::size_t number = 2;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != t.columns.size()) {
      throw IntegrityError("metrics line " + std::to_string(number) + ": expected " +
                           std::to_string(t.columns.size()) + " cells");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw IntegrityError("metrics line " + std::to_string(number) + ": bad number '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

MetricsTable read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open metrics " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_metrics_csv(buf.str());
}

CompareReport compare_metrics(const MetricsTable& a, const MetricsTable& b) {
  if (a.num_layers != b.num_layers || a.columns != b.columns) {
    throw SchemaError("compare: runs have different schemas (" + std::to_string(a.num_layers) + " vs " +
                      std::to_string(b.num_layers) + " layers)");
  }
  CompareReport r;
  r.common_epochs = std::min(a.rows.size(), b.rows.size());
  if (a.rows.size() != b.rows.size()) {
    r.warnings.push_back("epoch counts differ (" + std::to_string(a.rows.size()) + " vs " +
                         std::to_string(b.rows.size()) + "); comparing the first " +
                         std::to_string(r.common_epochs));
  }
  for (std::size_t i = 0; i < r.common_epochs; ++i) {
    EpochDelta d;
    d.epoch = static_cast<std::size_t>(a.at(i, "epoch"));
    d.loss = b.at(i, "loss") - a.at(i, "loss");
    d.train_acc = b.at(i, "train_acc") - a.at(i, "train_acc");
    d.val_acc = b.at(i, "val_acc") - a.at(i, "val_acc");
    d.sends = b.sends(i) - a.sends(i);
    r.deltas.push_back(d);
    r.total_sends_a += a.sends(i);
    r.total_sends_b += b.sends(i);
    r.total_bytes_a += a.at(i, "inner_bytes") + a.at(i, "outer_bytes");
    r.total_bytes_b += b.at(i, "inner_bytes") + b.at(i, "outer_bytes");
  }
  if (r.common_epochs > 0) {
    const std::size_t last = r.common_epochs - 1;
    r.final_train_acc_delta = b.at(last, "train_acc") - a.at(last, "train_acc");
    r.final_val_acc_delta = b.at(last, "val_acc") - a.at(last, "val_acc");
  }
  r.message_reduction = ratio_reduction(r.total_sends_a, r.total_sends_b);
  r.byte_reduction = ratio_reduction(r.total_bytes_a, r.total_bytes_b);
  return r;
}

std::string format_compare_report(const CompareReport& r) {
  std::ostringstream out;
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
  out << "epoch,d_loss,d_train_acc,d_val_acc,d_sends\n";
  for (const auto& d : r.deltas) {
    out << d.epoch << "," << real(d.loss) << "," << real(d.train_acc) << "," << real(d.val_acc) << ","
        << real(d.sends) << "\n";
  }
  out << "common_epochs " << r.common_epochs << "\n";
  out << "final_train_acc_delta " << real(r.final_train_acc_delta) << "\n";
  out << "final_val_acc_delta " << real(r.final_val_acc_delta) << "\n";
  out << "messages " << real(r.total_sends_a) << " -> " << real(r.total_sends_b) << " (reduction "
      << real(100.0 * r.message_reduction) << "%)\n";
  out << "bytes " << real(r.total_bytes_a) << " -> " << real(r.total_bytes_b) << " (reduction "
      << real(100.0 * r.byte_reduction) << "%)\n";
  return out.str();
}

}  // namespace cdfgnn
