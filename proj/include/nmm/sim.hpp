#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "nmm/dataset.hpp"
#include "nmm/errors.hpp"
#include "nmm/graph.hpp"
#include "nmm/kernel.hpp"
#include "nmm/search.hpp"
#include "nmm/structure.hpp"

namespace nmm {

/// A DAG over observed binary vertices and latent vertices with larger state
/// spaces. cpts[v] has one row of cards[v] probabilities per parent
/// configuration; configurations are mixed-radix over parents in increasing
/// index order, the first parent varying fastest.
struct LatentDagModel {
  std::string name;
  Admg dag;
  VertexSet observed;
  std::vector<int> cards;
  std::vector<std::vector<double>> cpts;

  std::size_t rows(int v) const {
    std::size_t r = 1;
    for (int p : dag.parents(v)) r *= static_cast<std::size_t>(cards[p]);
    return r;
  }
  bool has_parameters() const { return cpts.size() == cards.size() && !cpts.empty(); }

  /// Observed vertices as their own ADMG: the latent projection.
  Admg projection() const { return latent_projection(dag, observed); }
};

namespace detail {

inline LatentDagModel latent_model(std::string name, int observed, std::vector<std::string> latents,
                                   std::vector<int> latent_cards, const std::vector<Edge>& edges) {
  auto names = Admg::default_names(observed);
  for (auto& l : latents) names.push_back(l);
  LatentDagModel m;
  m.name = std::move(name);
  m.dag = Admg::from_edges(names, edges, {});
  m.observed = VertexSet::first_n(observed);
  m.cards.assign(observed, 2);
  m.cards.insert(m.cards.end(), latent_cards.begin(), latent_cards.end());
  return m;
}

}  // namespace detail

/// x1->x2->x3->x4 with a 16-state latent u -> x2, u -> x4.
inline LatentDagModel build_verma4() {
  return detail::latent_model("verma4", 4, {"u"}, {16}, {{0, 1}, {1, 2}, {2, 3}, {4, 1}, {4, 3}});
}

/// x1->x2->x3->x4 with 8-state latents u1 -> {x2, x5} and u2 -> {x4, x5}.
inline LatentDagModel build_chain5() {
  return detail::latent_model("chain5", 5, {"u1", "u2"}, {8, 8},
                              {{0, 1}, {1, 2}, {2, 3}, {5, 1}, {5, 4}, {6, 3}, {6, 4}});
}

/// x1->x2->x3->x4 with latents h1 -> {x1, x3} and h2 -> {x2, x4}; projects to
/// the Verma graph x1->x2->x3->x4, x1<->x3, x2<->x4.
inline LatentDagModel build_verma_bows(int latent_card = 4) {
  return detail::latent_model("verma", 4, {"h1", "h2"}, {latent_card, latent_card},
                              {{0, 1}, {1, 2}, {2, 3}, {4, 0}, {4, 2}, {5, 1}, {5, 3}});
}

inline LatentDagModel build_model(const std::string& name) {
  if (name == "verma4") return build_verma4();
  if (name == "chain5") return build_chain5();
  if (name == "verma") return build_verma_bows();
  throw SchemaError("unknown model '" + name + "' (expected verma4, chain5 or verma)");
}

/// Exact joint over the observed vertices (bit i = value of observed vertex i).
inline std::vector<double> observed_joint(const LatentDagModel& m) {
  if (!m.has_parameters()) throw SchemaError("model has no parameters");
  const Admg& g = m.dag;
  const auto order = g.topological_order();
  const int n = g.size();
  std::vector<double> out(std::size_t{1} << m.observed.size(), 0.0);
  std::vector<int> value(n, 0);
  auto row_of = [&](int v) {
    std::size_t r = 0;
    std::size_t stride = 1;
    for (int p : g.parents(v)) {
      r += stride * static_cast<std::size_t>(value[p]);
      stride *= static_cast<std::size_t>(m.cards[p]);
    }
    return r;
  };
  auto walk = [&](auto&& self, std::size_t k, double prob) -> void {
    if (k == order.size()) {
      std::uint32_t x = 0;
      int i = 0;
      for (int v : m.observed) x |= static_cast<std::uint32_t>(value[v]) << i++;
      out[x] += prob;
      return;
    }
    const int v = order[k];
    const double* row = &m.cpts[v][row_of(v) * static_cast<std::size_t>(m.cards[v])];
    for (int s = 0; s < m.cards[v]; ++s) {
      value[v] = s;
      self(self, k + 1, prob * row[s]);
    }
    value[v] = 0;
  };
  walk(walk, 0, 1.0);
  return out;
}

struct FaithfulnessConfig {
  double alpha = 0.15;  // symmetric Dirichlet concentration for every CPT row
  double gap = 0.004;
  std::size_t max_tries = 10000;
};

namespace detail {

/// sum_z q(z | w) TV(q(a, b | z, w), q(a | z, w) q(b | z, w)), averaged over
/// the context values w. `m` is the kernel with everything outside
/// {a, b} | z | context already summed out.
inline double pair_dependence(std::span<const double> m, int a, int b, VertexSet z, VertexSet context) {
  double sum = 0.0;
  int count = 0;
  for_each_subset(context, [&](VertexSet w) {
    double total = 0.0;
    double weighted = 0.0;
    for_each_subset(z, [&](VertexSet zv) {
      const std::uint32_t base = w.bits() | zv.bits();
      const double c00 = m[base];
      const double c10 = m[base | 1U << a];
      const double c01 = m[base | 1U << b];
      const double c11 = m[base | 1U << a | 1U << b];
      const double s = c00 + c01 + c10 + c11;
      if (!(s > 0.0)) return;
      // every cell of a 2x2 table deviates from independence by the same amount
      weighted += 2.0 * std::abs(c11 * s - (c10 + c11) * (c01 + c11)) / s;
      total += s;
    });
    sum += total > 0.0 ? weighted / total : 0.0;
    ++count;
  });
  return sum / count;
}

}  // namespace detail

/// Weakest dependence the projection implies. For every reachable set R and
/// every pair a, b in R that is m-connected given Z | W in the reached graph
/// (W = V - R, Z within R - {a, b}), takes pair_dependence in the kernel
/// reached by fixing W; returns the minimum.
inline double min_implied_dependence(const Admg& proj, std::span<const double> joint) {
  KernelTable p(proj, std::vector<double>(joint.begin(), joint.end()));
  double worst = std::numeric_limits<double>::infinity();
  const int n = proj.size();
  for (const auto& r : reachable_sets(proj)) {
    KernelTable q = kernel_fix_sequence(p, r.order);
    const Admg reached = fix_sequence(proj, r.order);
    const VertexSet w = proj.all() - r.set;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (!r.set.contains(a) || !r.set.contains(b)) continue;
        const VertexSet rest = r.set - VertexSet{a, b};
        for_each_subset(rest, [&](VertexSet z) {
          if (m_separated(reached, VertexSet::single(a), VertexSet::single(b), z | w)) return;
          auto m = marginalize(q.values(), rest - z);
          worst = std::min(worst, detail::pair_dependence(m, a, b, z, w));
        });
      }
    }
  }
  return worst;
}

/// Draws every CPT row from a symmetric Dirichlet(cfg.alpha) and keeps the
/// first draw whose implied dependencies all reach cfg.gap.
inline LatentDagModel random_parameters(LatentDagModel m, std::uint64_t seed, const FaithfulnessConfig& cfg = {}) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(cfg.alpha, 1.0);
  const Admg proj = m.projection();
  for (std::size_t attempt = 0; attempt < cfg.max_tries; ++attempt) {
    m.cpts.assign(m.cards.size(), {});
    for (int v = 0; v < m.dag.size(); ++v) {
      const std::size_t k = static_cast<std::size_t>(m.cards[v]);
      auto& t = m.cpts[v];
      t.resize(m.rows(v) * k);
      for (std::size_t r = 0; r < m.rows(v); ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) s += t[r * k + i] = gamma(rng);
        if (!(s > 0.0)) {  // all draws underflowed: fall back to a point mass
          t[r * k] = s = 1.0;
        }
        for (std::size_t i = 0; i < k; ++i) t[r * k + i] /= s;
      }
    }
    auto joint = observed_joint(m);
    if (std::all_of(joint.begin(), joint.end(), [](double x) { return x > 0.0; }) &&
        min_implied_dependence(proj, joint) >= cfg.gap) {
      return m;
    }
  }
  throw RejectionExhausted("no approximately faithful parameters after " + std::to_string(cfg.max_tries) +
                           " draws");
}

/// n ancestral draws; only the observed vertices are kept.
inline Dataset sample(const LatentDagModel& m, std::size_t n, std::uint64_t seed) {
  if (!m.has_parameters()) throw SchemaError("model has no parameters");
  const Admg& g = m.dag;
  const auto order = g.topological_order();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> counts(std::size_t{1} << m.observed.size(), 0.0);
  std::vector<int> value(g.size(), 0);
  for (std::size_t s = 0; s < n; ++s) {
    for (int v : order) {
      std::size_t r = 0;
      std::size_t stride = 1;
      for (int p : g.parents(v)) {
        r += stride * static_cast<std::size_t>(value[p]);
        stride *= static_cast<std::size_t>(m.cards[p]);
      }
      const double* row = &m.cpts[v][r * static_cast<std::size_t>(m.cards[v])];
      double u = unif(rng);
      int k = 0;
      while (k + 1 < m.cards[v] && u >= row[k]) u -= row[k++];
      value[v] = k;
    }
    std::uint32_t x = 0;
    int i = 0;
    for (int v : m.observed) x |= static_cast<std::uint32_t>(value[v]) << i++;
    counts[x] += 1.0;
  }
  std::vector<std::string> names;
  for (int v : m.observed) names.push_back(g.name(v));
  return Dataset(std::move(names), std::move(counts));
}

/// Graphs counted as correct recoveries: the projection, the projection with
/// x1->x2 replaced by x1<->x2, and the projection with both (a bow).
inline std::vector<Admg> true_class(const LatentDagModel& m) {
  const Admg proj = m.projection();
  return {proj, proj.without_directed(0, 1).with_bidirected(0, 1), proj.with_bidirected(0, 1)};
}

/// Independent 64-bit stream seed for (seed, parts...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (auto p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t raw[2];
  seq.generate(raw, raw + 2);
  return (static_cast<std::uint64_t>(raw[0]) << 32) | raw[1];
}

struct RecoveryConfig {
  SearchConfig search;
  FaithfulnessConfig faithfulness;
  double smoothing = 0.5;  // used only for datasets with empty cells
  int threads = 1;
};

struct RecoveryRow {
  std::string model;
  std::size_t n = 0;
  std::size_t reps = 0;
  std::size_t successes = 0;
  double rate = 0.0;
};

struct TrialOutcome {
  bool success = false;
  std::size_t plateau_size = 0;
  bool smoothed = false;
};

/// Parameters of a trial depend on (seed, trial) only, so every sample size
/// sees the same models.
inline LatentDagModel trial_parameters(const LatentDagModel& skeleton, std::size_t trial, std::uint64_t seed,
                                       const FaithfulnessConfig& cfg = {}) {
  return random_parameters(skeleton, derive_seed(seed, {trial, 0}), cfg);
}

inline TrialOutcome recovery_trial(const LatentDagModel& skeleton, std::size_t n, std::size_t trial,
                                   std::uint64_t seed, const RecoveryConfig& cfg) {
  LatentDagModel m = trial_parameters(skeleton, trial, seed, cfg.faithfulness);
  Dataset data = sample(m, n, derive_seed(seed, {trial, n + 1}));
  SearchConfig sc = cfg.search;
  TrialOutcome out;
  if (data.has_zero_cells()) {
    sc.fit.smoothing = cfg.smoothing;
    out.smoothed = true;
  }
  sc.threads = 1;
  SearchResult res = tabu_search(data, sc);
  std::set<std::string> truth;
  for (const auto& g : true_class(m)) truth.insert(canonical_key(g));
  out.plateau_size = res.plateau.size();
  out.success = !res.plateau.empty();
  for (const auto& g : res.plateau) out.success = out.success && truth.contains(canonical_key(g));
  return out;
}

inline std::vector<RecoveryRow> recovery_experiment(const std::string& model_name, const std::vector<std::size_t>& sizes,
                                                    std::size_t reps, std::uint64_t seed,
                                                    const RecoveryConfig& cfg = {}) {
  const LatentDagModel skeleton = build_model(model_name);
  std::vector<RecoveryRow> rows;
  if (reps == 0) return rows;
  for (std::size_t n : sizes) {
    std::vector<char> ok(reps, 0);
    auto work = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t t = lo; t < hi; ++t) ok[t] = recovery_trial(skeleton, n, t, seed, cfg).success;
    };
    const std::size_t threads = static_cast<std::size_t>(std::max(1, cfg.threads));
    if (threads == 1 || reps < 2) {
      work(0, reps);
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = (reps + threads - 1) / threads;
      for (std::size_t lo = 0; lo < reps; lo += chunk) pool.emplace_back(work, lo, std::min(reps, lo + chunk));
      for (auto& th : pool) th.join();
    }
    RecoveryRow row{model_name, n, reps, 0, 0.0};
    for (char c : ok) row.successes += c ? 1 : 0;
    row.rate = reps ? static_cast<double>(row.successes) / static_cast<double>(reps) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

inline void write_recovery_csv(std::ostream& out, const std::vector<RecoveryRow>& rows) {
  out << "model,n,reps,successes,rate\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.n << ',' << r.reps << ',' << r.successes << ',' << r.rate << '\n';
  }
}

}  // namespace nmm
