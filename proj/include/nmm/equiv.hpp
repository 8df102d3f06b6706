#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "nmm/dataset.hpp"
#include "nmm/errors.hpp"
#include "nmm/fit.hpp"
#include "nmm/graph.hpp"
#include "nmm/params.hpp"
#include "nmm/structure.hpp"

namespace nmm {

/// Every labeled DAG on n vertices (names x1..xn), in a fixed order.
inline std::vector<Admg> enumerate_dags(int n) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  std::size_t total = 1;
  for (std::size_t k = 0; k < pairs.size(); ++k) total *= 3;
  const auto names = Admg::default_names(n);
  std::vector<Admg> out;
  std::vector<std::uint32_t> parents(n);
  for (std::size_t code = 0; code < total; ++code) {
    std::fill(parents.begin(), parents.end(), 0U);
    std::vector<Edge> dir;
    std::size_t c = code;
    for (auto [i, j] : pairs) {
      switch (c % 3) {
        case 1: dir.emplace_back(i, j); parents[j] |= 1U << i; break;
        case 2: dir.emplace_back(j, i); parents[i] |= 1U << j; break;
        default: break;
      }
      c /= 3;
    }
    // acyclic iff repeatedly removing parentless vertices empties the graph
    std::uint32_t left = n ? (1U << n) - 1 : 0;
    bool progress = true;
    while (left && progress) {
      progress = false;
      for (int v = 0; v < n; ++v) {
        if ((left >> v & 1U) && (parents[v] & left) == 0) {
          left &= ~(1U << v);
          progress = true;
        }
      }
    }
    if (left == 0) out.push_back(Admg::from_edges(names, dir, {}));
  }
  return out;
}

/// Every labeled DAG crossed with every set of bidirected edges.
inline std::vector<Admg> enumerate_admgs(int n) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  std::vector<Admg> out;
  for (const Admg& dag : enumerate_dags(n)) {
    for (std::uint32_t mask = 0; mask < (1U << pairs.size()); ++mask) {
      std::vector<Edge> bi;
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (mask >> k & 1U) bi.push_back(pairs[k]);
      }
      out.push_back(Admg::from_edges(dag.names(), dag.directed_edges(), bi));
    }
  }
  return out;
}

/// One character per (pair a < b, Z within the rest): '1' iff a and b are
/// m-separated given Z. Pairs are lexicographic, Z by increasing mask.
inline std::string ci_fingerprint(const Admg& g) {
  std::string out;
  const VertexSet all = g.random();
  for (int a = 0; a < g.size(); ++a) {
    for (int b = a + 1; b < g.size(); ++b) {
      const VertexSet rest = all - VertexSet{a, b};
      std::vector<VertexSet> zs;
      for_each_subset(rest, [&](VertexSet z) { zs.push_back(z); });
      std::sort(zs.begin(), zs.end());
      for (VertexSet z : zs) {
        out += m_separated(g, VertexSet::single(a), VertexSet::single(b), z) ? '1' : '0';
      }
    }
  }
  return out;
}

/// Number of (head, tail value) pairs of the ordinary Markov parameterization:
/// H is a head iff it lies in one district of G restricted to an(H) and no
/// member of H is a proper ancestor of another; its tail is the rest of that
/// district together with the district's parents.
inline std::size_t ordinary_param_count(const Admg& g) {
  std::size_t count = 0;
  const std::uint32_t full = g.random().bits();
  for (std::uint32_t hm = 1; hm <= full; ++hm) {
    if ((hm & ~full) != 0) continue;
    const VertexSet h(hm);
    const VertexSet an = g.ancestors(h);
    bool barren = true;
    for (int v : h) {
      if (g.descendants(VertexSet::single(v)).without(v).intersects(h)) barren = false;
    }
    if (!barren) continue;
    // district of h.front() using bidirected edges inside an(H)
    VertexSet dist = VertexSet::single(h.front());
    VertexSet frontier = dist;
    while (!frontier.empty()) {
      VertexSet next;
      for (int v : frontier) next |= g.spouses(v) & an;
      frontier = next - dist;
      dist |= next;
    }
    if (!h.subset_of(dist)) continue;
    const VertexSet tail = (dist - h) | (g.parents(dist) - dist);
    count += std::size_t{1} << tail.size();
  }
  return count;
}

inline std::size_t nested_param_count(const Admg& g) {
  return enumerate_params(g)->size();
}

/// Labeled edge patterns, vertices 0..3 standing for x1..x4.
struct EdgePattern {
  std::vector<Edge> directed;
  std::vector<Edge> bidirected;
};

struct PatternType {
  std::string tag;
  std::vector<EdgePattern> members;
};

inline const std::vector<PatternType>& conjectured_patterns() {
  static const std::vector<PatternType> kTypes = [] {
    const EdgePattern c2{{{0, 1}, {1, 2}, {0, 2}, {2, 3}}, {{1, 3}}};
    const EdgePattern d1{{{0, 1}, {1, 2}, {2, 3}}, {{1, 3}}};
    std::vector<PatternType> t;
    t.push_back({"type_a", {{{{0, 1}, {1, 2}, {2, 3}}, {{0, 2}, {0, 3}}}}});
    t.push_back({"type_b", {{{{0, 1}, {1, 2}, {1, 3}}, {{0, 2}, {0, 3}}}}});
    t.push_back({"type_c",
                 {
                     {{{0, 1}, {1, 2}, {2, 3}}, {{0, 2}, {1, 3}}},
                     c2,
                     {c2.directed, {{0, 2}, {1, 3}}},
                     {{{1, 2}, {0, 2}, {2, 3}}, {{0, 1}, {1, 3}}},
                     {c2.directed, {{0, 1}, {1, 3}}},
                 }});
    t.push_back({"type_d",
                 {
                     d1,
                     {{{1, 2}, {2, 3}}, {{0, 1}, {1, 3}}},
                     {d1.directed, {{0, 1}, {1, 3}}},
                 }});
    return t;
  }();
  return kTypes;
}

/// perm[v] is the new index of vertex v.
inline Admg relabel(const EdgePattern& p, const std::array<int, 4>& perm) {
  std::vector<Edge> d;
  std::vector<Edge> b;
  for (auto [x, y] : p.directed) d.emplace_back(perm[x], perm[y]);
  for (auto [x, y] : p.bidirected) b.emplace_back(perm[x], perm[y]);
  return Admg::from_edges(Admg::default_names(4), d, b);
}

struct ConjecturedClass {
  std::string tag;
  std::vector<Admg> members;
};

/// Every relabeling of every pattern type, deduplicated by member set.
inline std::vector<ConjecturedClass> pattern_classes() {
  std::vector<ConjecturedClass> out;
  std::set<std::vector<std::string>> seen;
  for (const auto& type : conjectured_patterns()) {
    std::array<int, 4> perm{0, 1, 2, 3};
    do {
      ConjecturedClass c{type.tag, {}};
      std::vector<std::string> keys;
      for (const auto& p : type.members) {
        c.members.push_back(relabel(p, perm));
        keys.push_back(canonical_key(c.members.back()));
      }
      std::sort(keys.begin(), keys.end());
      if (seen.insert(keys).second) out.push_back(std::move(c));
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return out;
}

struct CensusRecord {
  Admg graph;
  std::string key;
  std::string fingerprint;
  int ci_class = -1;
  std::size_t nested_dim = 0;
  std::size_t ordinary_dim = 0;
  std::string pattern = "none";
  int conjectured_class = -1;
};

struct CensusSummary {
  int n = 0;
  std::size_t dags = 0;
  std::size_t admgs = 0;
  std::size_t ci_classes = 0;
  std::size_t ci_classes_dag = 0;
  std::size_t ci_classes_mixed = 0;
  std::size_t discrepant = 0;
  std::size_t conjectured_classes = 0;
  std::map<std::string, std::size_t> per_type;
  std::size_t uncovered = 0;     // discrepant graphs matched by no class
  std::size_t overcovered = 0;   // discrepant graphs matched by several classes
  std::size_t non_discrepant_members = 0;
  bool checked = false;
  std::vector<std::string> mismatches;
};

struct Census {
  std::vector<CensusRecord> records;
  std::vector<ConjecturedClass> classes;  // only those used when n == 4
  CensusSummary summary;
};

/// Builds every record; the per-graph work is split over `threads` workers.
inline Census run_census(int n, int threads = 1) {
  Census c;
  c.summary.n = n;
  c.summary.dags = enumerate_dags(n).size();
  auto graphs = enumerate_admgs(n);
  c.summary.admgs = graphs.size();
  c.records.resize(graphs.size());
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      auto& r = c.records[i];
      r.graph = graphs[i];
      r.key = canonical_key(graphs[i]);
      r.fingerprint = ci_fingerprint(graphs[i]);
      r.nested_dim = nested_param_count(graphs[i]);
      r.ordinary_dim = ordinary_param_count(graphs[i]);
    }
  };
  const std::size_t t = static_cast<std::size_t>(std::max(1, threads));
  if (t == 1) {
    work(0, graphs.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (graphs.size() + t - 1) / t;
    for (std::size_t lo = 0; lo < graphs.size(); lo += chunk) {
      pool.emplace_back(work, lo, std::min(graphs.size(), lo + chunk));
    }
    for (auto& th : pool) th.join();
  }

  std::map<std::string, int> class_of;
  std::vector<bool> has_dag;
  for (auto& r : c.records) {
    auto [it, inserted] = class_of.emplace(r.fingerprint, static_cast<int>(class_of.size()));
    if (inserted) has_dag.push_back(false);
    r.ci_class = it->second;
    if (r.graph.bidirected_count() == 0) has_dag[r.ci_class] = true;
  }
  c.summary.ci_classes = class_of.size();
  c.summary.ci_classes_dag = static_cast<std::size_t>(std::count(has_dag.begin(), has_dag.end(), true));
  c.summary.ci_classes_mixed = c.summary.ci_classes - c.summary.ci_classes_dag;

  std::map<std::string, std::size_t> by_key;
  for (std::size_t i = 0; i < c.records.size(); ++i) {
    by_key[c.records[i].key] = i;
    if (c.records[i].nested_dim != c.records[i].ordinary_dim) ++c.summary.discrepant;
  }

  if (n == 4) {
    std::vector<int> hits(c.records.size(), 0);
    for (auto& cls : pattern_classes()) {
      const int id = static_cast<int>(c.classes.size());
      for (const auto& g : cls.members) {
        auto& r = c.records[by_key.at(canonical_key(g))];
        if (r.nested_dim == r.ordinary_dim) ++c.summary.non_discrepant_members;
        ++hits[by_key.at(canonical_key(g))];
        r.pattern = cls.tag;
        r.conjectured_class = id;
      }
      ++c.summary.per_type[cls.tag];
      c.classes.push_back(std::move(cls));
    }
    c.summary.conjectured_classes = c.classes.size();
    for (std::size_t i = 0; i < c.records.size(); ++i) {
      const auto& r = c.records[i];
      if (r.nested_dim == r.ordinary_dim) continue;
      if (hits[i] == 0) ++c.summary.uncovered;
      if (hits[i] > 1) ++c.summary.overcovered;
    }
  }
  return c;
}

/// Compares a census at n = 4 against the published counts; fills
/// summary.mismatches and sets summary.checked.
inline void check_census(CensusSummary& s) {
  s.checked = s.n == 4;
  s.mismatches.clear();
  if (!s.checked) return;
  auto expect = [&](const std::string& what, std::size_t got, std::size_t want) {
    if (got != want) {
      s.mismatches.push_back(what + ": expected " + std::to_string(want) + ", got " + std::to_string(got));
    }
  };
  expect("dags", s.dags, 543);
  expect("admgs", s.admgs, 34752);
  expect("ci_classes", s.ci_classes, 248);
  expect("ci_classes_dag", s.ci_classes_dag, 185);
  expect("ci_classes_mixed", s.ci_classes_mixed, 63);
  expect("discrepant", s.discrepant, 228);
  expect("conjectured_classes", s.conjectured_classes, 84);
  const std::map<std::string, std::size_t> want{{"type_a", 24}, {"type_b", 12}, {"type_c", 24}, {"type_d", 24}};
  for (const auto& [tag, count] : want) {
    auto it = s.per_type.find(tag);
    expect(tag, it == s.per_type.end() ? 0 : it->second, count);
  }
  expect("uncovered discrepant graphs", s.uncovered, 0);
  expect("multiply covered discrepant graphs", s.overcovered, 0);
  expect("non-discrepant pattern members", s.non_discrepant_members, 0);
}

/// Throws CensusMismatch listing every failed check.
inline void require_census(const CensusSummary& s) {
  if (s.mismatches.empty()) return;
  std::string msg;
  for (const auto& m : s.mismatches) msg += (msg.empty() ? "" : "; ") + m;
  throw CensusMismatch(msg);
}

inline void write_census_csv(std::ostream& out, const Census& c) {
  out << "graph_key,ci_class,nested_dim,ordinary_dim,pattern,conjectured_class\n";
  for (const auto& r : c.records) {
    out << key_hex(r.key) << ',' << r.ci_class << ',' << r.nested_dim << ',' << r.ordinary_dim << ','
        << r.pattern << ',';
    if (r.conjectured_class >= 0) out << r.conjectured_class;
    out << '\n';
  }
}

struct ClassSpread {
  std::string tag;
  double within = 0.0;  // max over datasets of (max - min) / |mean| loglik
};

struct VerifyReport {
  std::vector<ClassSpread> classes;
  double worst_within = 0.0;
  double min_across = 0.0;  // smallest relative gap between two classes' logliks, over datasets
  std::size_t fits = 0;
};

/// Counts of n draws from a Dirichlet(1) joint over 2^vars cells, redrawn
/// until every cell is observed.
inline Dataset saturated_dataset(int vars, std::size_t n, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  const std::size_t cells = std::size_t{1} << vars;
  while (true) {
    std::vector<double> p(cells);
    double s = 0.0;
    for (double& x : p) s += x = expo(rng);
    for (double& x : p) x /= s;
    std::discrete_distribution<std::size_t> draw(p.begin(), p.end());
    std::vector<double> counts(cells, 0.0);
    for (std::size_t i = 0; i < n; ++i) counts[draw(rng)] += 1.0;
    if (std::none_of(counts.begin(), counts.end(), [](double c) { return c == 0.0; })) {
      return Dataset(Admg::default_names(vars), std::move(counts));
    }
  }
}

/// Fits every member of every class on n_datasets saturated-model datasets
/// and reports how far logliks spread inside each class and between classes.
inline VerifyReport verify_classes(const std::vector<ConjecturedClass>& classes, std::size_t n_datasets,
                                   std::uint64_t seed, std::size_t n = 5000, const FitConfig& cfg = {}) {
  VerifyReport rep;
  rep.classes.resize(classes.size());
  for (std::size_t k = 0; k < classes.size(); ++k) rep.classes[k].tag = classes[k].tag;
  rep.min_across = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  for (std::size_t d = 0; d < n_datasets; ++d) {
    Dataset data = saturated_dataset(4, n, rng);
    std::vector<double> means;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      double sum = 0.0;
      for (const auto& g : classes[k].members) {
        double ll = q_fit(g, data, cfg).loglik;
        ++rep.fits;
        lo = std::min(lo, ll);
        hi = std::max(hi, ll);
        sum += ll;
      }
      const double mean = sum / static_cast<double>(classes[k].members.size());
      const double spread = (hi - lo) / std::abs(mean);
      rep.classes[k].within = std::max(rep.classes[k].within, spread);
      rep.worst_within = std::max(rep.worst_within, spread);
      means.push_back(mean);
    }
    for (std::size_t i = 0; i < means.size(); ++i) {
      for (std::size_t j = i + 1; j < means.size(); ++j) {
        rep.min_across = std::min(rep.min_across, std::abs(means[i] - means[j]) / std::abs(means[i]));
      }
    }
  }
  return rep;
}

}  // namespace nmm
