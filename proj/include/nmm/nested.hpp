#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nmm/kernel.hpp"
#include "nmm/structure.hpp"

namespace nmm {

struct NestedReport {
  bool holds = true;
  double worst_order_gap = 0.0;   // max entrywise spread across fixing orders
  double worst_factor_gap = 0.0;  // max deviation from the district factorization
  std::vector<VertexSet> order_violations;
  std::vector<VertexSet> factor_violations;
};

namespace detail {

/// Largest deviation of the reached kernel q from a product of district
/// factors f_D(x_D | x_pa(D)). The factors come from the chain rule along a
/// topological order; each must ignore coordinates outside D | pa(D).
inline double district_factor_gap(const KernelTable& q) {
  const Admg& g = q.graph();
  const VertexSet rnd = g.random();
  std::vector<int> order;
  for (int v : g.topological_order()) {
    if (rnd.contains(v)) order.push_back(v);
  }
  const std::size_t size = q.size();
  // cond[i][x] = q(x_{order[i]} | x_{order[0..i-1]}, x_W)
  std::vector<std::vector<double>> cond(order.size());
  VertexSet later = rnd;
  std::vector<double> prev = marginalize(q.values(), rnd);  // == 1 per context value
  for (std::size_t i = 0; i < order.size(); ++i) {
    later = later.without(order[i]);
    std::vector<double> cur = marginalize(q.values(), later);
    cond[i].resize(size);
    for (std::size_t x = 0; x < size; ++x) cond[i][x] = prev[x] > 0.0 ? cur[x] / prev[x] : 0.0;
    prev = std::move(cur);
  }

  double gap = 0.0;
  std::vector<double> product(size, 1.0);
  for (VertexSet d : districts(g)) {
    const VertexSet keep = d | g.parents(d);
    const std::uint32_t keep_bits = keep.bits();
    for (std::size_t x = 0; x < size; ++x) {
      double f = 1.0;
      double f_proj = 1.0;
      const std::uint32_t xp = static_cast<std::uint32_t>(x) & keep_bits;
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (!d.contains(order[i])) continue;
        f *= cond[i][x];
        f_proj *= cond[i][xp];
      }
      gap = std::max(gap, std::abs(f - f_proj));
      product[x] *= f_proj;
    }
  }
  for (std::size_t x = 0; x < size; ++x) gap = std::max(gap, std::abs(product[x] - q[x]));
  return gap;
}

}  // namespace detail

/// Checks the nested factorization of a strictly positive joint p over g:
/// for every reachable set, all valid fixing orders must give the same kernel
/// and that kernel must factor over the districts of the reached graph.
inline NestedReport verify_nested_factorization(const Admg& g, const KernelTable& p, double tol) {
  NestedReport report;
  for (const auto& r : reachable_sets(g)) {
    std::vector<double> first;
    double order_gap = 0.0;
    auto walk = [&](auto&& self, const KernelTable& q) -> void {
      const Admg& cur = q.graph();
      if (cur.random() == r.set) {
        if (first.empty()) {
          first.assign(q.values().begin(), q.values().end());
        } else {
          for (std::size_t x = 0; x < first.size(); ++x) {
            order_gap = std::max(order_gap, std::abs(first[x] - q[x]));
          }
        }
        return;
      }
      for (int v : fixable(cur) - r.set) self(self, kernel_fix(q, v));
    };
    walk(walk, p);
    report.worst_order_gap = std::max(report.worst_order_gap, order_gap);
    if (order_gap > tol) report.order_violations.push_back(r.set);

    KernelTable reached = kernel_fix_sequence(p, r.order);
    double fgap = detail::district_factor_gap(reached);
    report.worst_factor_gap = std::max(report.worst_factor_gap, fgap);
    if (fgap > tol) report.factor_violations.push_back(r.set);
  }
  report.holds = report.order_violations.empty() && report.factor_violations.empty();
  return report;
}

/// Dependence of x4 on x1 after dividing out p(x3 | x2, x1): the max over
/// x3, x4 of |g(x4; 0, x3) - g(x4; 1, x3)| with
/// g(x4; x1, x3) = sum_{x2} p(x4 | x1, x2, x3) p(x2 | x1).
/// Variables are vertices 0..3 of the table (bit v = value of x_{v+1}).
inline double verma_residual(std::span<const double> p) {
  if (p.size() != 16) throw SchemaError("verma_residual expects a joint over 4 binary variables");
  auto at = [&](int x1, int x2, int x3, int x4) { return p[x1 | (x2 << 1) | (x3 << 2) | (x4 << 3)]; };
  auto g = [&](int x1, int x3, int x4) {
    double px1 = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) px1 += at(x1, a, b, c);
    double total = 0.0;
    for (int x2 = 0; x2 < 2; ++x2) {
      double p12 = 0.0;
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) p12 += at(x1, x2, b, c);
      double p123 = at(x1, x2, x3, 0) + at(x1, x2, x3, 1);
      total += at(x1, x2, x3, x4) / p123 * (p12 / px1);
    }
    return total;
  };
  double worst = 0.0;
  for (int x3 = 0; x3 < 2; ++x3)
    for (int x4 = 0; x4 < 2; ++x4) worst = std::max(worst, std::abs(g(0, x3, x4) - g(1, x3, x4)));
  return worst;
}

}  // namespace nmm
