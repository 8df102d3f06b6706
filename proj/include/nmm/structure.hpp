#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nmm/errors.hpp"
#include "nmm/graph.hpp"
#include "nmm/vertex_set.hpp"

namespace nmm {

// ---------------------------------------------------------------------------
// Districts and fixing

/// Bidirected-connected component of random vertex v.
inline VertexSet district_of(const Admg& g, int v) {
  VertexSet out = VertexSet::single(v);
  VertexSet frontier = out;
  while (!frontier.empty()) {
    VertexSet next;
    for (int u : frontier) next |= g.spouses(u);
    next -= out;
    out |= next;
    frontier = next;
  }
  return out;
}

/// Partition of the random vertices into districts, ordered by lowest member.
inline std::vector<VertexSet> districts(const Admg& g) {
  std::vector<VertexSet> out;
  VertexSet left = g.random();
  while (!left.empty()) {
    VertexSet d = district_of(g, left.front());
    out.push_back(d);
    left -= d;
  }
  return out;
}

/// Random vertices whose district meets their descendants only in themselves.
inline VertexSet fixable(const Admg& g) {
  VertexSet out;
  for (int v : g.random()) {
    if ((district_of(g, v) & g.descendants(VertexSet::single(v))) == VertexSet::single(v)) {
      out = out.with(v);
    }
  }
  return out;
}

/// Moves every vertex of s into the context and drops all arrowheads into s.
/// No fixability check: use only with a set known to be validly fixable.
inline Admg fix_unchecked(const Admg& g, VertexSet s) {
  Admg out = g;
  for (int r : s) {
    for (int p : out.parents_[r]) out.children_[p] = out.children_[p].without(r);
    out.parents_[r] = VertexSet{};
    for (int sp : out.spouses_[r]) out.spouses_[sp] = out.spouses_[sp].without(r);
    out.spouses_[r] = VertexSet{};
  }
  out.context_ |= s;
  return out;
}

inline Admg fix_graph(const Admg& g, int r) {
  if (r < 0 || r >= g.size() || !fixable(g).contains(r)) {
    throw NotFixable("vertex '" + (r >= 0 && r < g.size() ? g.name(r) : std::to_string(r)) +
                     "' is not fixable");
  }
  return fix_unchecked(g, VertexSet::single(r));
}

/// Applies fix_graph along `order`, throwing NotFixable at the first invalid step.
inline Admg fix_sequence(const Admg& g, const std::vector<int>& order) {
  Admg out = g;
  for (int r : order) out = fix_graph(out, r);
  return out;
}

struct ReachableSet {
  VertexSet set;
  std::vector<int> order;  // one witnessing fixing order for random() - set
};

/// Every reachable subset of the random vertices, sorted by mask. Exploration
/// memoizes on the reached vertex set.
inline std::vector<ReachableSet> reachable_sets(const Admg& g) {
  std::map<VertexSet::mask_type, std::vector<int>> seen;
  std::vector<int> order;
  auto explore = [&](auto&& self, const Admg& cur) -> void {
    auto [it, inserted] = seen.emplace(cur.random().bits(), order);
    if (!inserted) return;
    for (int v : fixable(cur)) {
      order.push_back(v);
      self(self, fix_unchecked(cur, VertexSet::single(v)));
      order.pop_back();
    }
  };
  explore(explore, g);
  std::vector<ReachableSet> out;
  out.reserve(seen.size());
  for (auto& [mask, ord] : seen) out.push_back({VertexSet(mask), ord});
  return out;
}

/// Greedily fixes the lowest-index fixable vertex outside `target` until only
/// `target` remains random. Returns nullopt when target is not reachable.
inline std::optional<std::vector<int>> first_fixing_order(const Admg& g, VertexSet target) {
  std::vector<int> order;
  Admg cur = g;
  while (cur.random() != target) {
    VertexSet cand = fixable(cur) - target;
    if (cand.empty()) return std::nullopt;
    int r = cand.front();
    order.push_back(r);
    cur = fix_unchecked(cur, VertexSet::single(r));
  }
  return order;
}

/// Every valid fixing order that reaches `target` from g.
inline std::vector<std::vector<int>> all_fixing_orders(const Admg& g, VertexSet target) {
  std::vector<std::vector<int>> out;
  std::vector<int> order;
  auto walk = [&](auto&& self, const Admg& cur) -> void {
    if (cur.random() == target) {
      out.push_back(order);
      return;
    }
    for (int r : fixable(cur) - target) {
      order.push_back(r);
      self(self, fix_unchecked(cur, VertexSet::single(r)));
      order.pop_back();
    }
  };
  walk(walk, g);
  return out;
}

// ---------------------------------------------------------------------------
// Intrinsic sets, recursive heads and tails

struct IntrinsicEntry {
  VertexSet set;   // intrinsic set C
  VertexSet head;  // vertices of C without children in C
  VertexSet tail;  // (C - head) | pa(C)
};

class IntrinsicCatalog {
 public:
  IntrinsicCatalog() = default;
  explicit IntrinsicCatalog(std::vector<IntrinsicEntry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
      return size_then_lex_less(a.head, b.head);
    });
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      if (entries_[i].head == entries_[i - 1].head) {
        throw PartitionFailure("two intrinsic sets share a recursive head");
      }
    }
  }

  const std::vector<IntrinsicEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Index into entries() of the entry with this head, or -1.
  int find_head(VertexSet head) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].head == head) return static_cast<int>(i);
    }
    return -1;
  }

  /// Partition of b into recursive heads, as entry indices. Peels the heads
  /// inside the remainder that are maximal under inclusion of their
  /// intrinsic sets, until nothing is left.
  std::vector<int> head_partition(VertexSet b) const {
    std::vector<int> out;
    VertexSet rest = b;
    std::vector<int> cands;
    while (!rest.empty()) {
      cands.clear();
      for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].head.subset_of(rest)) cands.push_back(static_cast<int>(i));
      }
      VertexSet taken;
      bool any = false;
      for (int i : cands) {
        const VertexSet ci = entries_[i].set;
        bool dominated = std::any_of(cands.begin(), cands.end(), [&](int j) {
          return j != i && ci.subset_of(entries_[j].set) && ci != entries_[j].set;
        });
        if (dominated) continue;
        if (taken.intersects(entries_[i].head)) {
          throw PartitionFailure("maximal heads overlap");
        }
        taken |= entries_[i].head;
        out.push_back(i);
        any = true;
      }
      if (!any) throw PartitionFailure("no recursive head inside the remaining vertices");
      rest -= taken;
    }
    return out;
  }

 private:
  std::vector<IntrinsicEntry> entries_;
};

/// Districts of every reachable CADMG, deduplicated, with heads and tails.
inline IntrinsicCatalog intrinsic_sets(const Admg& g) {
  std::vector<IntrinsicEntry> entries;
  std::vector<VertexSet> seen;
  for (const auto& r : reachable_sets(g)) {
    Admg reached = fix_unchecked(g, g.random() - r.set);
    for (VertexSet c : districts(reached)) {
      if (std::find(seen.begin(), seen.end(), c) != seen.end()) continue;
      seen.push_back(c);
      VertexSet head;
      for (int v : c) {
        if (!g.children(v).intersects(c)) head = head.with(v);
      }
      VertexSet tail = (c - head) | (g.parents(c) - c);
      entries.push_back({c, head, tail});
    }
  }
  return IntrinsicCatalog(std::move(entries));
}

/// Head partition of b as head vertex sets.
inline std::vector<VertexSet> head_partition(const IntrinsicCatalog& cat, VertexSet b) {
  std::vector<VertexSet> out;
  for (int i : cat.head_partition(b)) out.push_back(cat.entries()[i].head);
  return out;
}

inline std::vector<VertexSet> head_partition(const Admg& g, VertexSet b) {
  if (!b.subset_of(g.random())) throw InvalidGraph("head_partition: set is not inside V");
  return head_partition(intrinsic_sets(g), b);
}

// ---------------------------------------------------------------------------
// m-separation

/// True when no path between X and Y is m-connecting given Z: every collider
/// on the path is an ancestor of Z and no non-collider is in Z.
inline bool m_separated(const Admg& g, VertexSet x, VertexSet y, VertexSet z) {
  const VertexSet an_z = g.ancestors(z);
  // visited[into][v]: v reached along an edge with an arrowhead at v (into=1) or not.
  VertexSet visited[2];
  std::vector<std::pair<int, bool>> stack;
  auto push = [&](int v, bool into) {
    if (!visited[into].contains(v)) {
      visited[into] = visited[into].with(v);
      stack.emplace_back(v, into);
    }
  };
  auto expand = [&](int v, bool into, bool is_start) {
    // leave through a tail at v: v is a non-collider
    if (is_start || !z.contains(v)) {
      for (int c : g.children(v)) push(c, true);
    }
    // leave through an arrowhead at v: collider iff we came in with one
    bool pass = is_start || (into ? an_z.contains(v) : !z.contains(v));
    if (pass) {
      for (int p : g.parents(v)) push(p, false);
      for (int s : g.spouses(v)) push(s, true);
    }
  };
  for (int v : x) expand(v, false, true);
  while (!stack.empty()) {
    auto [v, into] = stack.back();
    stack.pop_back();
    if (y.contains(v)) return false;
    if (x.contains(v)) continue;
    expand(v, into, false);
  }
  return true;
}

// ---------------------------------------------------------------------------
// Latent projection

/// Projects a DAG onto `observed`: a->b for directed paths through latents
/// only, a<->b for latent-sourced treks with latent intermediate non-colliders.
/// Observed vertices keep their relative order.
inline Admg latent_projection(const Admg& dag, VertexSet observed) {
  if (!dag.is_dag() || !dag.context().empty()) {
    throw InvalidGraph("latent_projection expects a DAG without context vertices");
  }
  const VertexSet latent = dag.all() - observed;
  // Observed vertices reachable from v by directed paths whose interior is latent.
  auto observed_reach = [&](int v) {
    VertexSet out;
    VertexSet seen;
    std::vector<int> stack{v};
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int c : dag.children(u)) {
        if (seen.contains(c)) continue;
        seen = seen.with(c);
        if (observed.contains(c)) {
          out = out.with(c);
        } else {
          stack.push_back(c);
        }
      }
    }
    return out;
  };

  std::vector<int> map(dag.size(), -1);
  std::vector<std::string> names;
  for (int v : observed) {
    map[v] = static_cast<int>(names.size());
    names.push_back(dag.name(v));
  }
  std::vector<Edge> dir;
  std::vector<Edge> bi;
  for (int a : observed) {
    for (int b : observed_reach(a)) dir.emplace_back(map[a], map[b]);
  }
  VertexSet spouse_of[VertexSet::kMaxVertices];
  for (int l : latent) {
    VertexSet r = observed_reach(l);
    for (int a : r) spouse_of[a] |= r.without(a);
  }
  for (int a : observed) {
    for (int b : spouse_of[a]) {
      if (a < b) bi.emplace_back(map[a], map[b]);
    }
  }
  std::sort(dir.begin(), dir.end());
  std::sort(bi.begin(), bi.end());
  return Admg::from_edges(std::move(names), dir, bi);
}

// ---------------------------------------------------------------------------
// Canonical key

/// Byte string identifying a graph over a fixed labeled vertex order: sorted
/// directed pairs, then sorted bidirected pairs, then context vertices, each
/// section prefixed by a 16-bit count.
inline std::string canonical_key(const Admg& g) {
  std::string key;
  auto put16 = [&](std::size_t n) {
    key.push_back(static_cast<char>(n & 0xff));
    key.push_back(static_cast<char>((n >> 8) & 0xff));
  };
  auto dir = g.directed_edges();
  put16(dir.size());
  for (auto [a, b] : dir) {
    key.push_back(static_cast<char>(a));
    key.push_back(static_cast<char>(b));
  }
  auto bi = g.bidirected_edges();
  put16(bi.size());
  for (auto [a, b] : bi) {
    key.push_back(static_cast<char>(a));
    key.push_back(static_cast<char>(b));
  }
  put16(g.context().size());
  for (int w : g.context()) key.push_back(static_cast<char>(w));
  return key;
}

/// Hex rendering of canonical_key for text outputs.
inline std::string key_hex(const std::string& key) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(key.size() * 2);
  for (unsigned char c : key) {
    out.push_back(kDigits[c >> 4]);
    out.push_back(kDigits[c & 15]);
  }
  return out;
}

/// Human-readable edge list, e.g. "x1->x2,x2<->x3".
inline std::string describe(const Admg& g) {
  std::string out;
  for (auto [a, b] : g.directed_edges()) {
    if (!out.empty()) out += ',';
    out += g.name(a) + "->" + g.name(b);
  }
  for (auto [a, b] : g.bidirected_edges()) {
    if (!out.empty()) out += ',';
    out += g.name(a) + "<->" + g.name(b);
  }
  return out.empty() ? "(empty)" : out;
}

}  // namespace nmm
