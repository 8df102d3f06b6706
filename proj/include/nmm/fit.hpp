#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "nmm/dataset.hpp"
#include "nmm/errors.hpp"
#include "nmm/params.hpp"

namespace nmm {

struct FitConfig {
  double tol = 1e-7;           // max parameter change over a full cycle
  int max_cycles = 500;
  double block_tol = 1e-10;    // max-norm gradient of loglik / N inside a block
  int max_block_iters = 100;
  double margin = 1e-9;        // every implied probability stays above this
  std::optional<double> smoothing;  // additive pseudo-count; off unless requested
};

struct FitResult {
  ThetaTable theta;
  double loglik = 0.0;
  int cycles = 0;
  bool converged = false;
  std::size_t block_updates = 0;
  std::size_t stalled_blocks = 0;  // line searches that found no improving step
  double worst_block_drop = 0.0;   // max over blocks of (loglik before - after)
};

/// Affine form of the joint in the block q(v): p = A q + c, feasible iff
/// A q >= b with b = -c.
struct ConstraintSystem {
  std::vector<std::size_t> params;  // global indices of q(v), in block order
  Eigen::MatrixXd A;                // rows are assignments (bit u = value of u)
  Eigen::VectorXd b;
  Eigen::VectorXd c;
};

/// Result of one block update.
struct BlockOutcome {
  double before = 0.0;
  double after = 0.0;
  double max_change = 0.0;
  int iterations = 0;
  bool stalled = false;
};

/// Totals over every block update in the process; read by the acceptance suite.
struct AscentMonitor {
  std::atomic<std::size_t> updates{0};
  std::atomic<double> worst_drop{0.0};
  std::atomic<std::size_t> reverted{0};        // updates rolled back by the guard
  std::atomic<double> worst_raw_drop{0.0};     // largest drop the solver proposed

  /// raw_after is the loglik the solver reached before any rollback.
  void record(double before, double after, double raw_after) {
    updates.fetch_add(1, std::memory_order_relaxed);
    if (raw_after < before) reverted.fetch_add(1, std::memory_order_relaxed);
    raise(worst_drop, before - after);
    raise(worst_raw_drop, before - raw_after);
  }

 private:
  static void raise(std::atomic<double>& slot, double v) {
    double cur = slot.load(std::memory_order_relaxed);
    while (v > cur && !slot.compare_exchange_weak(cur, v, std::memory_order_relaxed)) {
    }
  }
};

inline AscentMonitor& ascent_monitor() {
  static AscentMonitor monitor;
  return monitor;
}

namespace detail {

inline double loglik_of(std::span<const double> p, std::span<const double> counts) {
  double ll = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (counts[x] == 0.0) continue;
    if (!(p[x] > 0.0)) return -std::numeric_limits<double>::infinity();
    ll += counts[x] * std::log(p[x]);
  }
  return ll;
}

inline std::vector<std::size_t> block_params(const ParamIndex& index, int v) {
  std::vector<std::size_t> out;
  for (std::size_t b : index.blocks_containing(v)) {
    const auto& blk = index.blocks()[b];
    for (std::size_t k = 0; k < blk.count(); ++k) out.push_back(blk.offset + k);
  }
  return out;
}

/// Fills row-major a (rows x m) and c from the Moebius terms, holding every
/// parameter outside the block at its current value. Heads in a partition are
/// disjoint, so each term carries at most one block parameter.
inline void build_affine(const MoebiusMap& map, std::span<const double> theta,
                         std::span<const int> column_of, std::size_t m, std::vector<double>& a,
                         std::vector<double>& c) {
  const std::size_t rows = map.rows();
  a.assign(rows * m, 0.0);
  c.assign(rows, 0.0);
  for (std::size_t x = 0; x < rows; ++x) {
    for (const auto& t : map.terms(x)) {
      double prod = t.sign;
      int col = -1;
      for (std::uint32_t f : map.factors(t)) {
        int k = column_of[f];
        if (k >= 0) {
          col = k;
        } else {
          prod *= theta[f];
        }
      }
      if (col >= 0) {
        a[x * m + static_cast<std::size_t>(col)] += prod;
      } else {
        c[x] += prod;
      }
    }
  }
}

/// Maximizes sum_x n_x log(A_x q + c_x) over the block by damped Newton steps
/// with a feasibility-preserving Armijo backtracking line search.
inline BlockOutcome solve_block(const MoebiusMap& map, std::vector<double>& theta,
                                const std::vector<std::size_t>& params,
                                std::span<const double> counts, double total,
                                const FitConfig& cfg, std::vector<int>& column_of) {
  BlockOutcome out;
  const std::size_t m = params.size();
  const std::size_t rows = map.rows();
  if (m == 0) return out;
  for (std::size_t k = 0; k < m; ++k) column_of[params[k]] = static_cast<int>(k);
  std::vector<double> a;
  std::vector<double> c;
  build_affine(map, theta, column_of, m, a, c);
  for (std::size_t k = 0; k < m; ++k) column_of[params[k]] = -1;

  Eigen::VectorXd q(m);
  for (std::size_t k = 0; k < m; ++k) q[k] = theta[params[k]];
  const Eigen::VectorXd q0 = q;

  std::vector<double> p(rows);
  auto implied = [&](const Eigen::VectorXd& qq, std::vector<double>& pp) {
    for (std::size_t x = 0; x < rows; ++x) {
      double s = c[x];
      const double* row = &a[x * m];
      for (std::size_t k = 0; k < m; ++k) s += row[k] * qq[k];
      pp[x] = s;
    }
  };
  auto feasible = [&](const Eigen::VectorXd& qq, const std::vector<double>& pp) {
    for (std::size_t k = 0; k < m; ++k) {
      if (!(qq[k] > kThetaClamp && qq[k] < 1.0 - kThetaClamp)) return false;
    }
    for (std::size_t x = 0; x < rows; ++x) {
      if (!(pp[x] > cfg.margin)) return false;
    }
    return true;
  };

  implied(q, p);
  double f = loglik_of(p, counts);
  std::vector<double> pn(rows);
  Eigen::VectorXd g(m);
  Eigen::MatrixXd h(m, m);
  Eigen::VectorXd qn(m);
  for (int it = 0; it < cfg.max_block_iters; ++it) {
    out.iterations = it + 1;
    g.setZero();
    h.setZero();
    for (std::size_t x = 0; x < rows; ++x) {
      if (counts[x] == 0.0) continue;
      const double w = counts[x] / p[x];
      const double w2 = w / p[x];
      const double* row = &a[x * m];
      for (std::size_t i = 0; i < m; ++i) {
        if (row[i] == 0.0) continue;
        g[i] += w * row[i];
        for (std::size_t j = 0; j <= i; ++j) h(i, j) += w2 * row[i] * row[j];
      }
    }
    const double gnorm = g.cwiseAbs().maxCoeff() / total;
    if (gnorm < cfg.block_tol) break;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < i; ++j) h(j, i) = h(i, j);
    }
    Eigen::VectorXd d;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) d = ldlt.solve(g);
    double slope = d.size() == m ? g.dot(d) : -1.0;
    if (!(slope > 0.0) || !d.allFinite()) {
      d = g / total;
      slope = g.dot(d);
    }
    bool accepted = false;
    double step = 1.0;
    for (int ls = 0; ls < 80; ++ls) {
      qn = q + step * d;
      implied(qn, pn);
      if (feasible(qn, pn)) {
        double fn = loglik_of(pn, counts);
        if (fn >= f + 1e-4 * step * slope || (slope < 1e-10 && fn >= f)) {
          q = qn;
          std::swap(p, pn);
          f = fn;
          accepted = true;
          break;
        }
      }
      step *= 0.5;
      if (step * d.cwiseAbs().maxCoeff() < 1e-14) break;
    }
    if (!accepted) {
      out.stalled = gnorm > 1e-6;
      break;
    }
  }
  for (std::size_t k = 0; k < m; ++k) {
    theta[params[k]] = q[k];
    out.max_change = std::max(out.max_change, std::abs(q[k] - q0[k]));
  }
  return out;
}

/// Cell counts aligned with g, with the zero-count policy applied.
inline std::vector<double> prepared_counts(const Admg& g, const Dataset& data, const FitConfig& cfg) {
  Dataset aligned = data.aligned_to(g);
  if (cfg.smoothing) {
    aligned = aligned.smoothed(*cfg.smoothing);
  } else if (aligned.has_zero_cells()) {
    throw ZeroCounts("data has empty cells; fitting requires strictly positive counts");
  }
  return aligned.counts();
}

}  // namespace detail

/// sum_x n_x log p_x with p = theta_to_joint(theta).
inline double loglik(const ThetaTable& theta, const Dataset& data) {
  Dataset aligned = data.aligned_to(theta.graph());
  auto p = moebius_map(theta.index())->evaluate(theta.values());
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (aligned.counts()[x] > 0.0 && !(p[x] > 0.0)) {
      throw Infeasible("non-positive probability at an observed cell");
    }
  }
  return detail::loglik_of(p, aligned.counts());
}

inline ConstraintSystem constraint_system(const ThetaTable& theta, int v) {
  const ParamIndex& index = theta.index();
  auto map = moebius_map(index);
  ConstraintSystem sys;
  sys.params = detail::block_params(index, v);
  const std::size_t m = sys.params.size();
  std::vector<int> column_of(index.size(), -1);
  for (std::size_t k = 0; k < m; ++k) column_of[sys.params[k]] = static_cast<int>(k);
  std::vector<double> a;
  std::vector<double> c;
  detail::build_affine(*map, theta.values(), column_of, m, a, c);
  const auto rows = static_cast<Eigen::Index>(map->rows());
  sys.A = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      a.data(), rows, static_cast<Eigen::Index>(m));
  sys.c = Eigen::Map<const Eigen::VectorXd>(c.data(), rows);
  sys.b = -sys.c;
  return sys;
}

/// Refits the block q(v) of theta in place. Never lowers the log-likelihood:
/// an update that would (even by rounding) is rolled back.
inline BlockOutcome fit_vertex(ThetaTable& theta, int v, const Dataset& data, const FitConfig& cfg) {
  const ParamIndex& index = theta.index();
  auto map = moebius_map(index);
  auto counts = detail::prepared_counts(index.graph(), data, cfg);
  double total = 0.0;
  for (double n : counts) total += n;
  std::vector<int> column_of(index.size(), -1);
  std::vector<double>& values = theta.raw();
  const std::vector<double> saved = values;
  const double before = detail::loglik_of(map->evaluate(values), counts);
  BlockOutcome out = detail::solve_block(*map, values, detail::block_params(index, v), counts, total,
                                         cfg, column_of);
  double after = detail::loglik_of(map->evaluate(values), counts);
  const double raw = after;
  if (after < before) {
    values = saved;
    after = before;
    out.max_change = 0.0;
  }
  out.before = before;
  out.after = after;
  ascent_monitor().record(before, after, raw);
  return out;
}

/// Coordinate-block ascent: starting from the uniform distribution, refit
/// q(v) for each vertex in index order until a full cycle moves no parameter
/// by tol or more.
inline FitResult q_fit(const Admg& g, const Dataset& data, const FitConfig& cfg = {}) {
  auto counts = detail::prepared_counts(g, data, cfg);
  double total = 0.0;
  for (double n : counts) total += n;
  auto index = enumerate_params(g);
  auto map = moebius_map(*index);

  FitResult res;
  res.theta = ThetaTable::uniform(index);
  std::vector<double>& theta = res.theta.raw();
  std::vector<std::vector<std::size_t>> blocks(g.size());
  for (int v = 0; v < g.size(); ++v) blocks[v] = detail::block_params(*index, v);
  std::vector<int> column_of(index->size(), -1);
  std::vector<double> p(map->rows());
  map->evaluate(theta, p);
  double ll = detail::loglik_of(p, counts);
  std::vector<double> saved;
  for (int cycle = 1; cycle <= cfg.max_cycles; ++cycle) {
    res.cycles = cycle;
    double max_change = 0.0;
    for (int v = 0; v < g.size(); ++v) {
      saved.assign(theta.begin(), theta.end());
      BlockOutcome o = detail::solve_block(*map, theta, blocks[v], counts, total, cfg, column_of);
      map->evaluate(theta, p);
      double next = detail::loglik_of(p, counts);
      const double raw = next;
      if (next < ll) {
        theta = saved;
        next = ll;
        o.max_change = 0.0;
      }
      ascent_monitor().record(ll, next, raw);
      res.worst_block_drop = std::max(res.worst_block_drop, ll - next);
      ll = next;
      ++res.block_updates;
      if (o.stalled) ++res.stalled_blocks;
      max_change = std::max(max_change, o.max_change);
    }
    if (max_change < cfg.tol) {
      res.converged = true;
      break;
    }
  }
  res.loglik = ll;
  return res;
}

/// Number of free parameters of the nested model of g.
inline std::size_t dimension(const Admg& g) { return enumerate_params(g)->size(); }

/// -2 loglik + d log N; lower is better.
inline double bic(double loglik, std::size_t dim, double n) {
  return -2.0 * loglik + static_cast<double>(dim) * std::log(n);
}

inline double bic(const FitResult& fit, const Admg& g, double n) { return bic(fit.loglik, dimension(g), n); }

}  // namespace nmm
