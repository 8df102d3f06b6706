#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "nmm/errors.hpp"
#include "nmm/graph.hpp"
#include "nmm/kernel.hpp"
#include "nmm/structure.hpp"

namespace nmm {

/// Values are kept this far inside (0, 1).
inline constexpr double kThetaClamp = 1e-9;

/// One intrinsic set with its 2^|tail| parameters theta_H(t) = q_C(X_H = 0 | t).
struct ParamBlock {
  IntrinsicEntry entry;
  std::size_t offset = 0;
  std::size_t count() const { return std::size_t{1} << entry.tail.size(); }
};

/// Deterministic ordering of the binary parameters of an ADMG: blocks sorted by
/// (|head|, head indices), tail assignments lexicographic with the first tail
/// vertex most significant.
class ParamIndex {
 public:
  explicit ParamIndex(Admg graph) : graph_(std::move(graph)) {
    if (!graph_.context().empty()) throw InvalidGraph("parameters are defined for ADMGs (no context)");
    catalog_ = intrinsic_sets(graph_);
    std::size_t offset = 0;
    for (const auto& e : catalog_.entries()) {
      blocks_.push_back({e, offset});
      offset += blocks_.back().count();
    }
    size_ = offset;
  }

  const Admg& graph() const { return graph_; }
  const IntrinsicCatalog& catalog() const { return catalog_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  std::size_t size() const { return size_; }

  /// Global parameter index of block b at the tail values found in assignment x.
  std::size_t index(std::size_t b, std::uint32_t x) const {
    return blocks_[b].offset + pack_bits(x, blocks_[b].entry.tail);
  }

  int find_head(VertexSet head) const { return catalog_.find_head(head); }

  /// Blocks whose head contains v: the coordinate block q(v).
  std::vector<std::size_t> blocks_containing(int v) const {
    std::vector<std::size_t> out;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      if (blocks_[b].entry.head.contains(v)) out.push_back(b);
    }
    return out;
  }

 private:
  Admg graph_;
  IntrinsicCatalog catalog_;
  std::vector<ParamBlock> blocks_;
  std::size_t size_ = 0;
};

inline std::shared_ptr<const ParamIndex> enumerate_params(const Admg& g) {
  return std::make_shared<const ParamIndex>(g);
}

/// Parameter vector laid out by a ParamIndex.
class ThetaTable {
 public:
  ThetaTable() = default;
  /// Values are clamped into [kThetaClamp, 1 - kThetaClamp].
  ThetaTable(std::shared_ptr<const ParamIndex> index, std::vector<double> values)
      : index_(std::move(index)), values_(std::move(values)) {
    if (values_.size() != index_->size()) throw SchemaError("theta has the wrong number of values");
    for (double& v : values_) {
      if (!std::isfinite(v)) throw SchemaError("theta values must be finite");
      v = std::clamp(v, kThetaClamp, 1.0 - kThetaClamp);
    }
  }

  /// theta_H = 2^-|H| at every tail value: the uniform distribution.
  static ThetaTable uniform(std::shared_ptr<const ParamIndex> index) {
    std::vector<double> v(index->size());
    for (const auto& b : index->blocks()) {
      std::fill_n(v.begin() + static_cast<std::ptrdiff_t>(b.offset), b.count(),
                  std::ldexp(1.0, -b.entry.head.size()));
    }
    return ThetaTable(std::move(index), std::move(v));
  }

  const ParamIndex& index() const { return *index_; }
  const std::shared_ptr<const ParamIndex>& index_ptr() const { return index_; }
  const Admg& graph() const { return index_->graph(); }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  /// theta_H at packed tail assignment t.
  double value(VertexSet head, std::uint32_t t) const {
    int b = index_->find_head(head);
    if (b < 0) throw SchemaError("no parameter block with this head");
    return values_.at(index_->blocks()[b].offset + t);
  }

  /// Unclamped write access for the fitter.
  std::vector<double>& raw() { return values_; }

 private:
  std::shared_ptr<const ParamIndex> index_;
  std::vector<double> values_;
};

/// Signed product terms of the parameterization. Row x (a full assignment,
/// bit v = value of v) holds one term per B with zeros(x) <= B <= V, i.e.
/// 2^(number of ones in x) terms; a term with no factors is the empty product.
class MoebiusMap {
 public:
  struct Term {
    double sign;
    std::uint32_t begin;
    std::uint32_t end;
  };

  explicit MoebiusMap(const ParamIndex& index) {
    const Admg& g = index.graph();
    const int n = g.size();
    const std::uint32_t rows = 1U << n;
    const std::uint32_t full = rows - 1;
    std::vector<std::vector<int>> partition(rows);
    for (std::uint32_t b = 0; b < rows; ++b) partition[b] = index.catalog().head_partition(VertexSet(b));

    row_begin_.reserve(rows + 1);
    for (std::uint32_t x = 0; x < rows; ++x) {
      row_begin_.push_back(static_cast<std::uint32_t>(terms_.size()));
      const std::uint32_t zeros = full & ~x;
      for_each_subset(VertexSet(x), [&](VertexSet s) {
        const std::uint32_t b = zeros | s.bits();
        Term t{(s.size() % 2) ? -1.0 : 1.0, static_cast<std::uint32_t>(factors_.size()), 0};
        for (int blk : partition[b]) {
          factors_.push_back(static_cast<std::uint32_t>(index.index(static_cast<std::size_t>(blk), x)));
        }
        t.end = static_cast<std::uint32_t>(factors_.size());
        terms_.push_back(t);
      });
    }
    row_begin_.push_back(static_cast<std::uint32_t>(terms_.size()));
  }

  std::size_t rows() const { return row_begin_.size() - 1; }
  std::size_t term_count() const { return terms_.size(); }
  std::span<const Term> terms(std::size_t row) const {
    return {terms_.data() + row_begin_[row], terms_.data() + row_begin_[row + 1]};
  }
  std::span<const std::uint32_t> factors(const Term& t) const {
    return {factors_.data() + t.begin, factors_.data() + t.end};
  }

  void evaluate(std::span<const double> theta, std::span<double> out) const {
    for (std::size_t x = 0; x < rows(); ++x) {
      // alternating signs cancel heavily near the boundary; accumulate wide
      long double p = 0.0L;
      for (const Term& t : terms(x)) {
        long double prod = t.sign;
        for (std::uint32_t f = t.begin; f < t.end; ++f) prod *= theta[factors_[f]];
        p += prod;
      }
      out[x] = static_cast<double>(p);
    }
  }

  std::vector<double> evaluate(std::span<const double> theta) const {
    std::vector<double> out(rows());
    evaluate(theta, out);
    return out;
  }

 private:
  std::vector<std::uint32_t> row_begin_;
  std::vector<Term> terms_;
  std::vector<std::uint32_t> factors_;
};

inline constexpr std::size_t kMoebiusCacheLimit = 8192;

/// Process-wide read-mostly memo of MoebiusMaps keyed by vertex count and
/// canonical_key. Safe for concurrent readers and writers.
inline std::shared_ptr<const MoebiusMap> moebius_map(const ParamIndex& index) {
  static std::shared_mutex mutex;
  static std::map<std::string, std::shared_ptr<const MoebiusMap>> cache;
  const std::string key = std::to_string(index.graph().size()) + ":" + canonical_key(index.graph());
  {
    std::shared_lock lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto built = std::make_shared<const MoebiusMap>(index);
  std::unique_lock lock(mutex);
  if (cache.size() >= kMoebiusCacheLimit) cache.clear();  // holders keep their shared_ptr
  return cache.emplace(key, std::move(built)).first->second;
}

/// Joint distribution implied by theta. Throws Infeasible on a negative cell.
inline KernelTable theta_to_joint(const ThetaTable& theta) {
  auto map = moebius_map(theta.index());
  std::vector<double> p = map->evaluate(theta.values());
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (p[x] < 0.0) {
      throw Infeasible("theta implies negative probability " + std::to_string(p[x]) +
                       " at assignment " + std::to_string(x));
    }
  }
  return KernelTable(theta.graph(), std::move(p));
}

/// Recovers theta from a strictly positive joint by fixing V - C (lowest
/// index fixable vertex first) for every intrinsic set C.
inline ThetaTable joint_to_theta(std::shared_ptr<const ParamIndex> index, const KernelTable& p) {
  const Admg& g = index->graph();
  if (!(p.graph() == g)) throw SchemaError("joint is over a different graph");
  std::vector<double> values(index->size());
  for (std::size_t b = 0; b < index->blocks().size(); ++b) {
    const auto& blk = index->blocks()[b];
    const IntrinsicEntry& e = blk.entry;
    auto order = first_fixing_order(g, e.set);
    if (!order) throw PartitionFailure("intrinsic set is not reachable");
    KernelTable q = kernel_fix_sequence(p, *order);
    for (std::uint32_t t = 0; t < blk.count(); ++t) {
      const std::uint32_t x = unpack_bits(t, e.tail);
      double den = 0.0;
      for_each_subset(e.head, [&](VertexSet h) { den += q[x | h.bits()]; });
      if (!(den > 0.0)) throw DivisionByZero("zero kernel mass while extracting theta");
      values[blk.offset + t] = q[x] / den;
    }
  }
  return ThetaTable(std::move(index), std::move(values));
}

inline ThetaTable joint_to_theta(const Admg& g, const KernelTable& p) {
  return joint_to_theta(enumerate_params(g), p);
}

}  // namespace nmm
