#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "nmm/errors.hpp"
#include "nmm/graph.hpp"
#include "nmm/kernel.hpp"

namespace nmm {

/// Cell counts over full binary assignments. Cell x has bit i = value of
/// variables()[i].
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> variables, std::vector<double> counts)
      : variables_(std::move(variables)), counts_(std::move(counts)) {
    if (counts_.size() != (std::size_t{1} << variables_.size())) {
      throw SchemaError("dataset needs one count per assignment");
    }
    for (double c : counts_) {
      if (!(c >= 0.0) || !std::isfinite(c)) throw SchemaError("counts must be finite and >= 0");
      total_ += c;
    }
  }

  const std::vector<std::string>& variables() const { return variables_; }
  const std::vector<double>& counts() const { return counts_; }
  double total() const { return total_; }
  int width() const { return static_cast<int>(variables_.size()); }

  bool has_zero_cells() const {
    for (double c : counts_) {
      if (c == 0.0) return true;
    }
    return false;
  }

  /// Adds alpha to every cell.
  Dataset smoothed(double alpha) const {
    std::vector<double> c = counts_;
    for (double& v : c) v += alpha;
    return Dataset(variables_, std::move(c));
  }

  /// Same counts with variables permuted into the vertex order of g.
  Dataset aligned_to(const Admg& g) const {
    if (g.size() != width()) throw SchemaError("data and graph have different variable counts");
    std::vector<int> src(width());
    for (int v = 0; v < g.size(); ++v) {
      int found = -1;
      for (int i = 0; i < width(); ++i) {
        if (variables_[i] == g.name(v)) found = i;
      }
      if (found < 0) throw SchemaError("graph vertex '" + g.name(v) + "' missing from data");
      src[v] = found;
    }
    std::vector<double> c(counts_.size());
    for (std::uint32_t x = 0; x < c.size(); ++x) {
      std::uint32_t y = 0;
      for (int v = 0; v < width(); ++v) y |= ((x >> v) & 1U) << src[v];
      c[x] = counts_[y];
    }
    return Dataset(g.names(), std::move(c));
  }

 private:
  std::vector<std::string> variables_;
  std::vector<double> counts_;
  double total_ = 0.0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

/// Row index with the first listed vertex most significant.
inline std::uint32_t lex_to_mask(std::uint32_t row, int n) {
  std::uint32_t x = 0;
  for (int v = 0; v < n; ++v) x |= ((row >> (n - 1 - v)) & 1U) << v;
  return x;
}

}  // namespace detail

/// Reads a header of variable names (optionally ending in "count") followed
/// by 0/1 rows. Without a count column every row is one observation.
inline Dataset read_data_csv(std::istream& in) {
  std::string line;
  while (std::getline(in, line) && detail::blank(line)) {
  }
  if (line.empty()) throw SchemaError("data CSV is empty");
  auto header = detail::split_csv_line(line);
  bool weighted = !header.empty() && header.back() == "count";
  if (weighted) header.pop_back();
  if (header.empty()) throw SchemaError("data CSV has no variables");
  if (header.size() > 20) throw SchemaError("too many variables for a dense count table");
  const int n = static_cast<int>(header.size());
  std::vector<double> counts(std::size_t{1} << n, 0.0);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size() + (weighted ? 1 : 0)) {
      throw SchemaError("data CSV line " + std::to_string(lineno) + ": wrong number of columns");
    }
    std::uint32_t x = 0;
    for (int v = 0; v < n; ++v) {
      if (cells[v] == "1") {
        x |= 1U << v;
      } else if (cells[v] != "0") {
        throw SchemaError("data CSV line " + std::to_string(lineno) + ": values must be 0 or 1");
      }
    }
    double w = 1.0;
    if (weighted) {
      std::size_t used = 0;
      long long c = 0;
      try {
        c = std::stoll(cells.back(), &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cells.back().size() || c < 0) {
        throw SchemaError("data CSV line " + std::to_string(lineno) + ": bad count");
      }
      w = static_cast<double>(c);
    }
    counts[x] += w;
  }
  return Dataset(std::move(header), std::move(counts));
}

/// Writes one row per assignment (lexicographic, first variable most
/// significant) with a count column.
inline void write_data_csv(std::ostream& out, const Dataset& d) {
  const int n = d.width();
  for (int v = 0; v < n; ++v) out << d.variables()[v] << ',';
  out << "count\n";
  for (std::uint32_t row = 0; row < (1U << n); ++row) {
    std::uint32_t x = detail::lex_to_mask(row, n);
    for (int v = 0; v < n; ++v) out << ((x >> v) & 1U) << ',';
    out << static_cast<long long>(std::llround(d.counts()[x])) << '\n';
  }
}

/// Kernel or joint table as CSV: vertex names then `value_column`, one row per
/// assignment in lexicographic order.
inline void write_table_csv(std::ostream& out, const Admg& g, std::span<const double> values,
                            const std::string& value_column = "p") {
  const int n = g.size();
  for (int v = 0; v < n; ++v) out << g.name(v) << ',';
  out << value_column << '\n';
  std::ostringstream num;
  num.precision(17);
  for (std::uint32_t row = 0; row < (1U << n); ++row) {
    std::uint32_t x = detail::lex_to_mask(row, n);
    for (int v = 0; v < n; ++v) out << ((x >> v) & 1U) << ',';
    num.str("");
    num << values[x];
    out << num.str() << '\n';
  }
}

/// Reads a joint table CSV (columns = vertex names + "p") over g's vertices.
inline KernelTable read_joint_csv(std::istream& in, const Admg& g) {
  std::string line;
  while (std::getline(in, line) && detail::blank(line)) {
  }
  auto header = detail::split_csv_line(line);
  if (header.size() != static_cast<std::size_t>(g.size()) + 1 || header.back() != "p") {
    throw SchemaError("joint CSV header must list the graph's vertices followed by p");
  }
  std::vector<int> col(g.size());
  for (int i = 0; i < g.size(); ++i) col[i] = g.index_of(header[i]);
  std::vector<double> values(std::size_t{1} << g.size(), 0.0);
  std::vector<bool> seen(values.size(), false);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw SchemaError("joint CSV line " + std::to_string(lineno) + ": wrong number of columns");
    }
    std::uint32_t x = 0;
    for (int i = 0; i < g.size(); ++i) {
      if (cells[i] == "1") {
        x |= 1U << col[i];
      } else if (cells[i] != "0") {
        throw SchemaError("joint CSV line " + std::to_string(lineno) + ": values must be 0 or 1");
      }
    }
    if (seen[x]) throw SchemaError("joint CSV repeats an assignment");
    seen[x] = true;
    try {
      values[x] = std::stod(cells.back());
    } catch (const std::exception&) {
      throw SchemaError("joint CSV line " + std::to_string(lineno) + ": bad probability");
    }
  }
  for (bool s : seen) {
    if (!s) throw SchemaError("joint CSV is missing assignments");
  }
  return KernelTable(g, std::move(values));
}

}  // namespace nmm
