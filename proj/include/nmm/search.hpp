#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nmm/dataset.hpp"
#include "nmm/fit.hpp"
#include "nmm/graph.hpp"
#include "nmm/structure.hpp"

namespace nmm {

enum class MoveKind {
  AddDirected,
  RemoveDirected,
  ReverseDirected,
  AddBidirected,
  RemoveBidirected,
  DirectedToBidirected,
  BidirectedToDirected,
};

inline const char* to_string(MoveKind k) {
  switch (k) {
    case MoveKind::AddDirected: return "add_directed";
    case MoveKind::RemoveDirected: return "remove_directed";
    case MoveKind::ReverseDirected: return "reverse_directed";
    case MoveKind::AddBidirected: return "add_bidirected";
    case MoveKind::RemoveBidirected: return "remove_bidirected";
    case MoveKind::DirectedToBidirected: return "directed_to_bidirected";
    case MoveKind::BidirectedToDirected: return "bidirected_to_directed";
  }
  return "?";
}

/// For directed kinds (a, b) names the edge a->b as it exists before the move
/// (Remove/Reverse/DirectedToBidirected) or after it (Add/BidirectedToDirected).
struct Move {
  MoveKind kind;
  int a;
  int b;
  bool operator==(const Move&) const = default;
};

/// Every single-edge move that yields a valid ADMG, ordered by move kind and
/// then endpoint indices. A bow can only be formed by adding a bidirected edge
/// next to an existing directed one.
inline std::vector<std::pair<Move, Admg>> neighbors(const Admg& g) {
  std::vector<std::pair<Move, Admg>> out;
  const int n = g.size();
  auto adjacent_directed = [&](int a, int b) { return g.has_directed(a, b) || g.has_directed(b, a); };
  auto push_if_acyclic = [&](Move m, Admg h) {
    if (h.is_acyclic()) out.emplace_back(m, std::move(h));
  };
  // Directed edit results are built through the unchecked path: only
  // acyclicity can fail, and is tested explicitly.
  auto edited = [&](auto&& edit) -> std::optional<Admg> {
    try {
      return edit();
    } catch (const InvalidGraph&) {
      return std::nullopt;
    }
  };
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a == b || adjacent_directed(a, b) || g.has_bidirected(a, b)) continue;
      if (g.descendants(VertexSet::single(b)).contains(a)) continue;
      if (auto h = edited([&] { return g.with_directed(a, b); })) {
        out.emplace_back(Move{MoveKind::AddDirected, a, b}, std::move(*h));
      }
    }
  }
  for (auto [a, b] : g.directed_edges()) {
    out.emplace_back(Move{MoveKind::RemoveDirected, a, b}, g.without_directed(a, b));
  }
  for (auto [a, b] : g.directed_edges()) {
    if (auto h = edited([&] { return g.without_directed(a, b).with_directed(b, a); })) {
      push_if_acyclic(Move{MoveKind::ReverseDirected, a, b}, std::move(*h));
    }
  }
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      if (!g.has_bidirected(a, b)) {
        out.emplace_back(Move{MoveKind::AddBidirected, a, b}, g.with_bidirected(a, b));
      }
    }
  }
  for (auto [a, b] : g.bidirected_edges()) {
    out.emplace_back(Move{MoveKind::RemoveBidirected, a, b}, g.without_bidirected(a, b));
  }
  for (auto [a, b] : g.directed_edges()) {
    if (g.has_bidirected(a, b)) continue;
    out.emplace_back(Move{MoveKind::DirectedToBidirected, a, b},
                     g.without_directed(a, b).with_bidirected(a, b));
  }
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a == b || !g.has_bidirected(a, b) || adjacent_directed(a, b)) continue;
      if (auto h = edited([&] { return g.without_bidirected(a, b).with_directed(a, b); })) {
        out.emplace_back(Move{MoveKind::BidirectedToDirected, a, b}, std::move(*h));
      }
    }
  }
  return out;
}

struct Score {
  double loglik = -std::numeric_limits<double>::infinity();
  double bic = std::numeric_limits<double>::infinity();
  bool ok = false;
  std::string error;  // set when the fit threw
};

/// Thread-safe memo of fitted scores keyed by canonical_key.
class ScoreCache {
 public:
  std::optional<Score> find(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = scores_.find(key);
    if (it == scores_.end()) return std::nullopt;
    return it->second;
  }
  void store(const std::string& key, const Score& s) {
    std::unique_lock lock(mutex_);
    scores_[key] = s;
  }
  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return scores_.size();
  }
  std::size_t fits() const { return fits_; }
  void count_fit() {
    std::unique_lock lock(mutex_);
    ++fits_;
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, Score> scores_;
  std::size_t fits_ = 0;
};

/// Memoized q_fit + bic. Fit errors propagate and are not cached.
inline Score score_graph(const Admg& g, const Dataset& data, ScoreCache& cache, const FitConfig& cfg = {}) {
  const std::string key = canonical_key(g);
  if (auto hit = cache.find(key)) return *hit;
  FitResult fit = q_fit(g, data, cfg);
  cache.count_fit();
  Score s{fit.loglik, bic(fit.loglik, fit.theta.size(), data.total()), true, {}};
  cache.store(key, s);
  return s;
}

struct SearchConfig {
  FitConfig fit;
  std::optional<Admg> start;  // default: empty graph over the data's variables
  std::size_t max_expansions = 20000;
  std::size_t escape_steps = 20;  // consecutive non-improving tabu moves allowed once the plateau is exhausted
  double tie_tol = 1e-6;
  int threads = 1;
};

struct TraceEntry {
  std::string graph_key;  // hex canonical key of the expanded graph
  double bic;
};

struct SearchResult {
  double best_bic = std::numeric_limits<double>::infinity();
  std::vector<Admg> plateau;
  std::size_t expansions = 0;
  std::vector<TraceEntry> trace;
  std::size_t fits = 0;
  std::size_t failed_fits = 0;
  std::vector<std::string> log;
};

namespace detail {

/// Scores graphs in order; with threads > 1 the work is split in contiguous
/// chunks, so results never depend on scheduling.
inline std::vector<Score> score_all(const std::vector<std::pair<Move, Admg>>& items, const Dataset& data,
                                    ScoreCache& cache, const SearchConfig& cfg) {
  std::vector<Score> out(items.size());
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      try {
        out[i] = score_graph(items[i].second, data, cache, cfg.fit);
      } catch (const ModelError& e) {
        out[i] = Score{};
        out[i].error = e.what();
      }
    }
  };
  const std::size_t threads = std::max(1, cfg.threads);
  if (threads == 1 || items.size() < 2) {
    work(0, items.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (items.size() + threads - 1) / threads;
  for (std::size_t lo = 0; lo < items.size(); lo += chunk) {
    pool.emplace_back(work, lo, std::min(items.size(), lo + chunk));
  }
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace detail

/// Greedy BIC search with tabu and plateau moves. Each step expands the
/// oldest queued plateau graph; a strictly better neighbor resets the tabu
/// list and plateau and becomes the only queued graph. Neighbors tied with
/// the best score join the plateau. Once the plateau is exhausted, up to
/// cfg.escape_steps further steps move to the best non-tabu neighbor of the
/// last expanded graph even if it scores worse; finding a strictly better
/// graph this way starts over as above.
inline SearchResult tabu_search(const Dataset& data, const SearchConfig& cfg = {}) {
  ScoreCache cache;
  SearchResult res;
  Admg start = cfg.start ? *cfg.start : Admg(data.variables());
  Score s0 = score_graph(start, data, cache, cfg.fit);
  res.best_bic = s0.bic;

  std::deque<Admg> queue{start};
  std::vector<Admg> plateau{start};
  std::set<std::string> in_plateau{canonical_key(start)};
  std::set<std::string> tabu;
  std::optional<Admg> escape;  // best non-tabu neighbor of the last expansion
  double escape_bic = std::numeric_limits<double>::infinity();
  std::size_t escapes = 0;
  while (res.expansions < cfg.max_expansions) {
    Admg g;
    double g_bic = res.best_bic;
    if (!queue.empty()) {
      g = std::move(queue.front());
      queue.pop_front();
    } else if (escape && escapes < cfg.escape_steps) {
      g = std::move(*escape);
      g_bic = escape_bic;
      escape.reset();
      ++escapes;
    } else {
      break;
    }
    const std::string key = canonical_key(g);
    if (!tabu.insert(key).second) continue;
    ++res.expansions;
    res.trace.push_back({key_hex(key), g_bic});

    auto nbrs = neighbors(g);
    auto scores = detail::score_all(nbrs, data, cache, cfg);
    std::size_t best = nbrs.size();
    escape.reset();
    escape_bic = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      if (!scores[i].ok) {
        ++res.failed_fits;
        res.log.push_back(describe(nbrs[i].second) + ": " + scores[i].error);
        continue;
      }
      if (best == nbrs.size() || scores[i].bic < scores[best].bic) best = i;
      if (scores[i].bic < escape_bic && !tabu.contains(canonical_key(nbrs[i].second))) {
        escape = nbrs[i].second;
        escape_bic = scores[i].bic;
      }
    }
    if (best < nbrs.size() && scores[best].bic < res.best_bic - cfg.tie_tol) {
      res.best_bic = scores[best].bic;
      tabu.clear();
      queue.clear();
      plateau.clear();
      in_plateau.clear();
      escape.reset();
      escapes = 0;
      queue.push_back(nbrs[best].second);
      plateau.push_back(nbrs[best].second);
      in_plateau.insert(canonical_key(nbrs[best].second));
      continue;
    }
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      if (!scores[i].ok || std::abs(scores[i].bic - res.best_bic) >= cfg.tie_tol) continue;
      const std::string k = canonical_key(nbrs[i].second);
      if (tabu.contains(k) || !in_plateau.insert(k).second) continue;
      queue.push_back(nbrs[i].second);
      plateau.push_back(nbrs[i].second);
    }
  }
  res.plateau = std::move(plateau);
  res.fits = cache.fits();
  return res;
}

}  // namespace nmm
