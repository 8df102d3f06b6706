#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nmm/errors.hpp"
#include "nmm/graph.hpp"
#include "nmm/structure.hpp"

namespace nmm {

/// Dense binary kernel q(x_V | x_W). Entry x is the value at the full
/// assignment whose bit v is the value of vertex v (random and context alike).
class KernelTable {
 public:
  KernelTable() = default;
  KernelTable(Admg graph, std::vector<double> values)
      : graph_(std::move(graph)), values_(std::move(values)) {
    if (values_.size() != (std::size_t{1} << graph_.size())) {
      throw SchemaError("kernel table size does not match 2^|vertices|");
    }
    for (double v : values_) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw SchemaError("kernel entries must be finite and >= 0");
    }
  }

  const Admg& graph() const { return graph_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::uint32_t x) const { return values_[x]; }
  std::size_t size() const { return values_.size(); }

  /// max over context assignments of |sum_{x_V} q - 1|.
  double normalization_error() const {
    const auto ctx = graph_.context().bits();
    double worst = 0.0;
    for (std::uint32_t w = 0; w < values_.size(); ++w) {
      if ((w & ~ctx) != 0) continue;
      double s = 0.0;
      for (std::uint32_t x = 0; x < values_.size(); ++x) {
        if ((x & ctx) == w) s += values_[x];
      }
      worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
  }

  bool strictly_positive() const {
    for (double v : values_) {
      if (!(v > 0.0)) return false;
    }
    return true;
  }

 private:
  Admg graph_;
  std::vector<double> values_;
};

/// Sums the table over the vertices in `s`; the result is laid out like the
/// input and is constant along the summed coordinates.
inline std::vector<double> marginalize(std::span<const double> values, VertexSet s) {
  std::vector<double> out(values.begin(), values.end());
  for (int v : s) {
    const std::uint32_t bit = 1U << v;
    for (std::uint32_t x = 0; x < out.size(); ++x) {
      if (x & bit) continue;
      double t = out[x] + out[x | bit];
      out[x] = t;
      out[x | bit] = t;
    }
  }
  return out;
}

/// Markov blanket of r inside an(dis(r)): (dis(r) - r) | pa(dis(r)).
inline VertexSet fixing_blanket(const Admg& g, int r) {
  VertexSet d = district_of(g, r);
  return (d | g.parents(d)).without(r);
}

/// Fixes r in the kernel: divides q by q(x_r | x_mb) computed inside the
/// ancestral margin over an(dis(r)), and moves r into the context.
inline KernelTable kernel_fix(const KernelTable& q, int r) {
  const Admg& g = q.graph();
  Admg fixed = fix_graph(g, r);  // throws NotFixable
  const VertexSet d = district_of(g, r);
  const VertexSet anc = g.ancestors(d);
  const VertexSet mb = fixing_blanket(g, r);
  const VertexSet v = g.random();
  const VertexSet summed = (v - anc) | ((anc & v) - mb).without(r);
  std::vector<double> m = marginalize(q.values(), summed);

  const std::uint32_t bit = 1U << r;
  std::vector<double> out(q.size());
  for (std::uint32_t x = 0; x < out.size(); ++x) {
    double den = m[x & ~bit] + m[x | bit];
    double cond = den > 0.0 ? m[x] / den : 0.0;
    if (!(cond > 0.0)) {
      if (q[x] == 0.0 && den > 0.0) {
        out[x] = 0.0;
        continue;
      }
      std::string where;
      for (int u = 0; u < g.size(); ++u) {
        where += (u ? "," : "") + g.name(u) + "=" + std::to_string((x >> u) & 1U);
      }
      throw DivisionByZero("fixing '" + g.name(r) + "': zero conditional mass at " + where);
    }
    out[x] = q[x] / cond;
  }
  return KernelTable(std::move(fixed), std::move(out));
}

inline KernelTable kernel_fix_sequence(KernelTable q, const std::vector<int>& order) {
  for (int r : order) q = kernel_fix(q, r);
  return q;
}

}  // namespace nmm
