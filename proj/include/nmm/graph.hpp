#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "nmm/errors.hpp"
#include "nmm/vertex_set.hpp"

namespace nmm {

using Edge = std::pair<int, int>;

/// Conditional acyclic directed mixed graph. Random vertices V carry a kernel
/// q(x_V | x_W); context vertices W have no parents and no spouses. A plain
/// ADMG is the W = {} case. Values are immutable: every edit returns a copy.
class Admg {
 public:
  Admg() = default;

  /// Graph with the given random vertices and no edges.
  explicit Admg(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() > static_cast<std::size_t>(VertexSet::kMaxVertices)) {
      throw InvalidGraph("too many vertices");
    }
    std::unordered_set<std::string> seen;
    for (const auto& n : names_) {
      if (n.empty()) throw InvalidGraph("empty vertex name");
      if (!seen.insert(n).second) throw InvalidGraph("duplicate vertex name '" + n + "'");
    }
    parents_.assign(names_.size(), VertexSet{});
    children_.assign(names_.size(), VertexSet{});
    spouses_.assign(names_.size(), VertexSet{});
  }

  /// Builds and validates a graph in one go.
  static Admg from_edges(std::vector<std::string> names, const std::vector<Edge>& directed,
                         const std::vector<Edge>& bidirected, VertexSet context = {}) {
    Admg g(std::move(names));
    if (!context.subset_of(g.all())) throw InvalidGraph("context vertex out of range");
    g.context_ = context;
    for (auto [a, b] : directed) g.add_directed(a, b);
    for (auto [a, b] : bidirected) g.add_bidirected(a, b);
    g.validate();
    return g;
  }

  /// Names x1..xn.
  static std::vector<std::string> default_names(int n) {
    std::vector<std::string> out;
    for (int i = 1; i <= n; ++i) out.push_back("x" + std::to_string(i));
    return out;
  }

  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(int v) const { return names_.at(v); }
  int index_of(std::string_view name) const {
    for (int i = 0; i < size(); ++i) {
      if (names_[i] == name) return i;
    }
    throw InvalidGraph("unknown vertex '" + std::string(name) + "'");
  }

  VertexSet all() const { return VertexSet::first_n(size()); }
  VertexSet context() const { return context_; }
  VertexSet random() const { return all() - context_; }

  VertexSet parents(int v) const { return parents_[v]; }
  VertexSet children(int v) const { return children_[v]; }
  VertexSet spouses(int v) const { return spouses_[v]; }
  VertexSet parents(VertexSet s) const {
    VertexSet out;
    for (int v : s) out |= parents_[v];
    return out;
  }

  bool has_directed(int from, int to) const { return parents_[to].contains(from); }
  bool has_bidirected(int a, int b) const { return spouses_[a].contains(b); }
  bool is_dag() const {
    return std::all_of(spouses_.begin(), spouses_.end(), [](VertexSet s) { return s.empty(); });
  }
  std::size_t directed_count() const {
    std::size_t n = 0;
    for (auto p : parents_) n += p.size();
    return n;
  }
  std::size_t bidirected_count() const {
    std::size_t n = 0;
    for (auto s : spouses_) n += s.size();
    return n / 2;
  }

  /// Sorted (tail, head) pairs.
  std::vector<Edge> directed_edges() const {
    std::vector<Edge> out;
    for (int a = 0; a < size(); ++a) {
      for (int b : children_[a]) out.emplace_back(a, b);
    }
    return out;
  }
  /// Sorted pairs with the smaller index first.
  std::vector<Edge> bidirected_edges() const {
    std::vector<Edge> out;
    for (int a = 0; a < size(); ++a) {
      for (int b : spouses_[a]) {
        if (a < b) out.emplace_back(a, b);
      }
    }
    return out;
  }

  /// Ancestors of s, including s.
  VertexSet ancestors(VertexSet s) const {
    VertexSet out = s;
    VertexSet frontier = s;
    while (!frontier.empty()) {
      VertexSet next = parents(frontier) - out;
      out |= next;
      frontier = next;
    }
    return out;
  }

  /// Descendants of s, including s.
  VertexSet descendants(VertexSet s) const {
    VertexSet out = s;
    VertexSet frontier = s;
    while (!frontier.empty()) {
      VertexSet next;
      for (int v : frontier) next |= children_[v];
      next -= out;
      out |= next;
      frontier = next;
    }
    return out;
  }

  /// A topological order of all vertices (parents first, ties by index).
  std::vector<int> topological_order() const {
    std::vector<int> order;
    VertexSet placed;
    while (placed != all()) {
      bool progressed = false;
      for (int v : all() - placed) {
        if (parents_[v].subset_of(placed)) {
          order.push_back(v);
          placed = placed.with(v);
          progressed = true;
        }
      }
      if (!progressed) throw InvalidGraph("directed cycle");
    }
    return order;
  }

  bool is_acyclic() const {
    VertexSet placed;
    while (placed != all()) {
      VertexSet ready;
      for (int v : all() - placed) {
        if (parents_[v].subset_of(placed)) ready = ready.with(v);
      }
      if (ready.empty()) return false;
      placed |= ready;
    }
    return true;
  }

  Admg with_directed(int from, int to) const {
    Admg g = *this;
    g.add_directed(from, to);
    g.validate();
    return g;
  }
  Admg without_directed(int from, int to) const {
    if (!has_directed(from, to)) throw InvalidGraph("no such directed edge");
    Admg g = *this;
    g.parents_[to] = g.parents_[to].without(from);
    g.children_[from] = g.children_[from].without(to);
    return g;
  }
  Admg with_bidirected(int a, int b) const {
    Admg g = *this;
    g.add_bidirected(a, b);
    g.validate();
    return g;
  }
  Admg without_bidirected(int a, int b) const {
    if (!has_bidirected(a, b)) throw InvalidGraph("no such bidirected edge");
    Admg g = *this;
    g.spouses_[a] = g.spouses_[a].without(b);
    g.spouses_[b] = g.spouses_[b].without(a);
    return g;
  }

  /// Subgraph induced by s, with vertices renumbered in increasing index order.
  Admg induced(VertexSet s) const {
    std::vector<int> keep = s.to_vector();
    std::vector<int> map(size(), -1);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      map[keep[i]] = static_cast<int>(i);
      names.push_back(names_[keep[i]]);
    }
    std::vector<Edge> dir;
    std::vector<Edge> bi;
    for (auto [a, b] : directed_edges()) {
      if (s.contains(a) && s.contains(b)) dir.emplace_back(map[a], map[b]);
    }
    for (auto [a, b] : bidirected_edges()) {
      if (s.contains(a) && s.contains(b)) bi.emplace_back(map[a], map[b]);
    }
    VertexSet ctx;
    for (int w : context_ & s) ctx = ctx.with(map[w]);
    return from_edges(std::move(names), dir, bi, ctx);
  }

  bool operator==(const Admg& o) const {
    return names_ == o.names_ && context_ == o.context_ && parents_ == o.parents_ &&
           spouses_ == o.spouses_;
  }

 private:
  friend Admg fix_unchecked(const Admg&, VertexSet);

  void check_vertex(int v) const {
    if (v < 0 || v >= size()) throw InvalidGraph("vertex index out of range");
  }
  void add_directed(int from, int to) {
    check_vertex(from);
    check_vertex(to);
    if (from == to) throw InvalidGraph("self loop on '" + names_[from] + "'");
    if (has_directed(from, to)) {
      throw InvalidGraph("duplicate directed edge " + names_[from] + "->" + names_[to]);
    }
    parents_[to] = parents_[to].with(from);
    children_[from] = children_[from].with(to);
  }
  void add_bidirected(int a, int b) {
    check_vertex(a);
    check_vertex(b);
    if (a == b) throw InvalidGraph("bidirected self loop on '" + names_[a] + "'");
    if (has_bidirected(a, b)) {
      throw InvalidGraph("duplicate bidirected edge " + names_[a] + "<->" + names_[b]);
    }
    spouses_[a] = spouses_[a].with(b);
    spouses_[b] = spouses_[b].with(a);
  }
  void validate() const {
    for (int w : context_) {
      if (!parents_[w].empty() || !spouses_[w].empty()) {
        throw InvalidGraph("context vertex '" + names_[w] + "' has parents or spouses");
      }
    }
    if (!is_acyclic()) throw InvalidGraph("directed cycle");
  }

  std::vector<std::string> names_;
  VertexSet context_;
  std::vector<VertexSet> parents_;
  std::vector<VertexSet> children_;
  std::vector<VertexSet> spouses_;
};

}  // namespace nmm
