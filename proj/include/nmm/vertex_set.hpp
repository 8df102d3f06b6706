#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <iterator>
#include <vector>

namespace nmm {

/// A set of vertex indices stored as a 32-bit mask. Vertex i is bit i.
class VertexSet {
 public:
  using mask_type = std::uint32_t;
  static constexpr int kMaxVertices = 32;

  class iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = int;
    using difference_type = std::ptrdiff_t;
    using pointer = const int*;
    using reference = int;

    constexpr iterator() = default;
    constexpr explicit iterator(mask_type rest) : rest_(rest) {}
    constexpr int operator*() const { return std::countr_zero(rest_); }
    constexpr iterator& operator++() {
      rest_ &= rest_ - 1;
      return *this;
    }
    constexpr iterator operator++(int) {
      iterator old = *this;
      ++*this;
      return old;
    }
    constexpr bool operator==(const iterator&) const = default;

   private:
    mask_type rest_ = 0;
  };

  constexpr VertexSet() = default;
  constexpr explicit VertexSet(mask_type bits) : bits_(bits) {}
  constexpr VertexSet(std::initializer_list<int> vertices) {
    for (int v : vertices) bits_ |= mask_type{1} << v;
  }

  static constexpr VertexSet single(int v) { return VertexSet(mask_type{1} << v); }
  /// {0, 1, ..., n-1}
  static constexpr VertexSet first_n(int n) {
    return VertexSet(n >= kMaxVertices ? ~mask_type{0} : (mask_type{1} << n) - 1);
  }

  constexpr mask_type bits() const { return bits_; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr int size() const { return std::popcount(bits_); }
  constexpr bool contains(int v) const { return (bits_ >> v) & 1U; }
  constexpr bool subset_of(VertexSet other) const { return (bits_ & ~other.bits_) == 0; }
  constexpr bool intersects(VertexSet other) const { return (bits_ & other.bits_) != 0; }
  /// Lowest vertex index; undefined on the empty set.
  constexpr int front() const { return std::countr_zero(bits_); }

  constexpr VertexSet with(int v) const { return VertexSet(bits_ | (mask_type{1} << v)); }
  constexpr VertexSet without(int v) const { return VertexSet(bits_ & ~(mask_type{1} << v)); }

  constexpr iterator begin() const { return iterator(bits_); }
  constexpr iterator end() const { return iterator(0); }

  std::vector<int> to_vector() const { return {begin(), end()}; }

  constexpr VertexSet operator|(VertexSet o) const { return VertexSet(bits_ | o.bits_); }
  constexpr VertexSet operator&(VertexSet o) const { return VertexSet(bits_ & o.bits_); }
  constexpr VertexSet operator-(VertexSet o) const { return VertexSet(bits_ & ~o.bits_); }
  constexpr VertexSet& operator|=(VertexSet o) {
    bits_ |= o.bits_;
    return *this;
  }
  constexpr VertexSet& operator&=(VertexSet o) {
    bits_ &= o.bits_;
    return *this;
  }
  constexpr VertexSet& operator-=(VertexSet o) {
    bits_ &= ~o.bits_;
    return *this;
  }

  constexpr auto operator<=>(const VertexSet&) const = default;

 private:
  mask_type bits_ = 0;
};

/// Calls f(subset) for every subset of s, including the empty set and s itself.
template <typename F>
void for_each_subset(VertexSet s, F&& f) {
  const auto full = s.bits();
  auto sub = full;
  while (true) {
    f(VertexSet(sub));
    if (sub == 0) break;
    sub = (sub - 1) & full;
  }
}

/// Orders sets by size, then by their sorted index lists lexicographically.
inline bool size_then_lex_less(VertexSet a, VertexSet b) {
  if (a.size() != b.size()) return a.size() < b.size();
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (*ia != *ib) return *ia < *ib;
  }
  return false;
}

/// Packs the values of `vertices` (taken from assignment mask x) into an index,
/// first vertex most significant.
inline std::uint32_t pack_bits(std::uint32_t x, VertexSet vertices) {
  std::uint32_t out = 0;
  for (int v : vertices) out = (out << 1) | ((x >> v) & 1U);
  return out;
}

/// Inverse of pack_bits: spreads a packed index back onto the vertex positions.
inline std::uint32_t unpack_bits(std::uint32_t packed, VertexSet vertices) {
  std::uint32_t out = 0;
  int k = vertices.size();
  for (int v : vertices) {
    --k;
    out |= ((packed >> k) & 1U) << v;
  }
  return out;
}

}  // namespace nmm
