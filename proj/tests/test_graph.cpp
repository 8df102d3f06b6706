#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "nmm/equiv.hpp"
#include "nmm/structure.hpp"
#include "test_util.hpp"

using namespace nmm;
using testutil::make;

namespace {

std::set<std::uint32_t> masks(const std::vector<VertexSet>& sets) {
  std::set<std::uint32_t> out;
  for (auto s : sets) out.insert(s.bits());
  return out;
}

// d-separation by moralizing the ancestral subgraph of x, y, z
bool moral_dsep(const Admg& dag, VertexSet x, VertexSet y, VertexSet z) {
  const VertexSet an = dag.ancestors(x | y | z);
  const int n = dag.size();
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (int v : an) {
    auto pa = (dag.parents(v) & an).to_vector();
    for (int p : pa) adj[p][v] = adj[v][p] = true;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      for (std::size_t j = i + 1; j < pa.size(); ++j) adj[pa[i]][pa[j]] = adj[pa[j]][pa[i]] = true;
    }
  }
  VertexSet seen = x;
  std::vector<int> stack = x.to_vector();
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : an) {
      if (adj[v][w] && !z.contains(w) && !seen.contains(w)) {
        seen = seen.with(w);
        stack.push_back(w);
      }
    }
  }
  return !seen.intersects(y);
}

Admg random_dag(int n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<Edge> d;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (coin(rng)) d.emplace_back(i, j);
    }
  }
  return make(n, d);
}

Admg random_admg(int n, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.35);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Edge> d;
  std::vector<Edge> b;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (coin(rng)) d.emplace_back(perm[i], perm[j]);
      if (coin(rng)) b.emplace_back(i, j);
    }
  }
  return make(n, d, b);
}

}  // namespace

TEST(Districts, DagHasSingletons) {
  auto d = districts(testutil::chain_dag(4));
  EXPECT_EQ(masks(d), (std::set<std::uint32_t>{1, 2, 4, 8}));
}

TEST(Districts, Fig1bIsOneDistrict) {
  EXPECT_EQ(masks(districts(testutil::fig1b())), (std::set<std::uint32_t>{15}));
  EXPECT_EQ(masks(districts(testutil::bidirected_chain(4))), (std::set<std::uint32_t>{15}));
}

TEST(Districts, ContextVerticesExcluded) {
  Admg g = Admg::from_edges(Admg::default_names(3), {{2, 0}}, {{0, 1}}, VertexSet{2});
  EXPECT_EQ(masks(districts(g)), (std::set<std::uint32_t>{3}));
}

TEST(Fixable, Examples) {
  EXPECT_EQ(fixable(testutil::chain_dag(4)), VertexSet::first_n(4));
  EXPECT_EQ(fixable(testutil::verma_admg()), (VertexSet{2, 3}));
  EXPECT_EQ(fixable(testutil::bidirected_chain(4)), VertexSet::first_n(4));
}

TEST(FixGraph, VermaSink) {
  Admg f = fix_graph(testutil::verma_admg(), 3);
  EXPECT_EQ(f.context(), VertexSet{3});
  EXPECT_FALSE(f.has_directed(2, 3));
  EXPECT_FALSE(f.has_bidirected(1, 3));
  EXPECT_TRUE(f.has_directed(0, 1));
  EXPECT_TRUE(f.has_bidirected(0, 2));
}

TEST(FixGraph, DagSinkKeepsOutgoing) {
  Admg g = make(3, {{0, 1}, {1, 2}});
  Admg f = fix_graph(g, 1);
  EXPECT_FALSE(f.has_directed(0, 1));
  EXPECT_TRUE(f.has_directed(1, 2));
}

TEST(FixGraph, NotFixable) {
  EXPECT_THROW(fix_graph(testutil::verma_admg(), 1), NotFixable);
}

TEST(ReachableSets, DagReachesEverySubset) {
  EXPECT_EQ(reachable_sets(testutil::chain_dag(4)).size(), 16u);
}

TEST(ReachableSets, Verma) {
  std::set<std::uint32_t> r;
  for (const auto& e : reachable_sets(testutil::verma_admg())) r.insert(e.set.bits());
  EXPECT_TRUE(r.count(0b0111));
  EXPECT_FALSE(r.count(0b1110));
  EXPECT_TRUE(r.count(0b1010));
  EXPECT_TRUE(r.count(0b1111));
  auto order = first_fixing_order(testutil::verma_admg(), VertexSet{1, 3});
  ASSERT_TRUE(order.has_value());
  EXPECT_EQ(fix_sequence(testutil::verma_admg(), *order).random(), (VertexSet{1, 3}));
}

TEST(ReachableSets, AllOrdersGiveTheSameGraph) {
  for (int n = 1; n <= 4; ++n) {
    for (const Admg& g : enumerate_admgs(n)) {
      for (const auto& r : reachable_sets(g)) {
        auto orders = all_fixing_orders(g, r.set);
        ASSERT_FALSE(orders.empty());
        Admg ref = fix_sequence(g, orders.front());
        for (const auto& o : orders) ASSERT_EQ(fix_sequence(g, o), ref) << describe(g);
      }
    }
  }
}

TEST(IntrinsicSets, DagSingletons) {
  Admg g = testutil::chain_dag(4);
  auto cat = intrinsic_sets(g);
  ASSERT_EQ(cat.size(), 4u);
  for (const auto& e : cat.entries()) {
    EXPECT_EQ(e.set.size(), 1);
    EXPECT_EQ(e.head, e.set);
    EXPECT_EQ(e.tail, g.parents(e.set.front()));
  }
}

TEST(IntrinsicSets, BidirectedConnectedSets) {
  auto cat = intrinsic_sets(testutil::bidirected_chain(4));
  std::set<std::uint32_t> got;
  for (const auto& e : cat.entries()) {
    got.insert(e.set.bits());
    EXPECT_TRUE(e.tail.empty());
  }
  // connected sets of a path are its intervals
  std::set<std::uint32_t> want;
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) want.insert(((1U << (j + 1)) - 1) & ~((1U << i) - 1));
  }
  EXPECT_EQ(got, want);
}

TEST(IntrinsicSets, Fig1bHeadsAndTails) {
  auto cat = intrinsic_sets(testutil::fig1b());
  std::set<std::pair<std::uint32_t, std::uint32_t>> got;
  for (const auto& e : cat.entries()) got.emplace(e.head.bits(), e.tail.bits());
  std::set<std::pair<std::uint32_t, std::uint32_t>> want{
      {0b1001, 0b0110}, {0b0001, 0b0110}, {0b0110, 0}, {0b0010, 0}, {0b0100, 0}, {0b1000, 0b0010}, {0b1100, 0b0010}};
  EXPECT_EQ(got, want);
}

TEST(HeadPartition, Fig1b) {
  Admg g = testutil::fig1b();
  EXPECT_EQ(masks(head_partition(g, VertexSet::first_n(4))), (std::set<std::uint32_t>{0b1001, 0b0110}));
  EXPECT_EQ(masks(head_partition(g, VertexSet{0, 2, 3})), (std::set<std::uint32_t>{0b1001, 0b0100}));
}

TEST(HeadPartition, DagSingletons) {
  Admg g = make(4, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  for (std::uint32_t b = 1; b < 16; ++b) {
    auto parts = head_partition(g, VertexSet(b));
    EXPECT_EQ(static_cast<int>(parts.size()), std::popcount(b));
  }
}

namespace {

void expect_partition(const Admg& g) {
  auto cat = intrinsic_sets(g);
  for (std::uint32_t b = 1; b < (1U << g.size()); ++b) {
    VertexSet cover;
    for (VertexSet h : head_partition(cat, VertexSet(b))) {
      ASSERT_FALSE(h.intersects(cover)) << describe(g);
      ASSERT_GE(cat.find_head(h), 0);
      cover |= h;
    }
    ASSERT_EQ(cover, VertexSet(b)) << describe(g);
  }
}

}  // namespace

TEST(HeadPartition, CoversEverySubsetUpTo4) {
  for (int n = 1; n <= 4; ++n) {
    for (const Admg& g : enumerate_admgs(n)) expect_partition(g);
  }
}

TEST(HeadPartition, CoversEverySubsetRandom5) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1500; ++i) expect_partition(random_admg(5, rng));
}

TEST(MSeparation, Examples) {
  EXPECT_TRUE(m_separated(make(3, {{0, 1}, {1, 2}}), VertexSet{0}, VertexSet{2}, VertexSet{1}));
  Admg bi = testutil::bidirected_chain(3);
  EXPECT_TRUE(m_separated(bi, VertexSet{0}, VertexSet{2}, VertexSet{}));
  EXPECT_FALSE(m_separated(bi, VertexSet{0}, VertexSet{2}, VertexSet{1}));
}

TEST(MSeparation, VermaImpliesNoIndependence) {
  Admg g = testutil::verma_admg();
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      for_each_subset(VertexSet::first_n(4) - VertexSet{a, b}, [&](VertexSet z) {
        EXPECT_FALSE(m_separated(g, VertexSet{a}, VertexSet{b}, z));
      });
    }
  }
}

TEST(MSeparation, MatchesMoralizationOnDags) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 3 + rep % 3;
    Admg g = random_dag(n, 0.4, rng);
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        for_each_subset(VertexSet::first_n(n) - VertexSet{a, b}, [&](VertexSet z) {
          ASSERT_EQ(m_separated(g, VertexSet{a}, VertexSet{b}, z), moral_dsep(g, VertexSet{a}, VertexSet{b}, z))
              << describe(g);
        });
      }
    }
  }
}

TEST(LatentProjection, Fig1a) {
  // x1..x4, h1 -> {x1, x3}, h2 -> {x2, x4}
  Admg dag = Admg::from_edges({"x1", "x2", "x3", "x4", "h1", "h2"}, {{0, 1}, {1, 2}, {2, 3}, {4, 0}, {4, 2}, {5, 1}, {5, 3}},
                              {});
  Admg p = latent_projection(dag, VertexSet::first_n(4));
  EXPECT_EQ(p, testutil::verma_admg());
}

TEST(LatentProjection, Fig8a) {
  Admg dag = Admg::from_edges({"x1", "x2", "x3", "x4", "u"}, {{0, 1}, {1, 2}, {2, 3}, {4, 1}, {4, 3}}, {});
  EXPECT_EQ(latent_projection(dag, VertexSet::first_n(4)), make(4, {{0, 1}, {1, 2}, {2, 3}}, {{1, 3}}));
}

TEST(LatentProjection, NoLatentsIsIdentity) {
  Admg g = testutil::chain_dag(4);
  EXPECT_EQ(latent_projection(g, g.all()), g);
}

TEST(LatentProjection, PreservesSeparation) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 300; ++rep) {
    const int n = 4 + rep % 3;
    Admg dag = random_dag(n, 0.45, rng);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const int latents = 1 + rep % 2;
    VertexSet obs = VertexSet::first_n(n);
    for (int k = 0; k < latents; ++k) obs = obs.without(perm[k]);
    Admg proj = latent_projection(dag, obs);
    auto ov = obs.to_vector();
    for (std::size_t i = 0; i < ov.size(); ++i) {
      for (std::size_t j = i + 1; j < ov.size(); ++j) {
        const VertexSet rest = obs - VertexSet{ov[i], ov[j]};
        for_each_subset(rest, [&](VertexSet z) {
          // projection indices follow the order of observed vertices
          VertexSet pz;
          for (int v : z) pz = pz.with(static_cast<int>(std::find(ov.begin(), ov.end(), v) - ov.begin()));
          ASSERT_EQ(moral_dsep(dag, VertexSet{ov[i]}, VertexSet{ov[j]}, z),
                    m_separated(proj, VertexSet{static_cast<int>(i)}, VertexSet{static_cast<int>(j)}, pz))
              << describe(dag);
        });
      }
    }
  }
}

TEST(CanonicalKey, Examples) {
  Admg a = make(3, {{0, 1}, {1, 2}}, {{0, 2}});
  Admg b = make(3, {{1, 2}, {0, 1}}, {{2, 0}});
  EXPECT_EQ(canonical_key(a), canonical_key(b));
  EXPECT_NE(canonical_key(make(2, {{0, 1}})), canonical_key(make(2, {}, {{0, 1}})));
  EXPECT_EQ(canonical_key(Admg(Admg::default_names(2))), canonical_key(make(2, {})));
}

TEST(Admg, RejectsInvalid) {
  EXPECT_THROW(make(2, {{0, 1}, {1, 0}}), InvalidGraph);
  EXPECT_THROW(make(2, {}, {{0, 0}}), InvalidGraph);
  EXPECT_THROW(Admg::from_edges(Admg::default_names(2), {{0, 1}}, {}, VertexSet{1}), InvalidGraph);
  EXPECT_THROW(Admg({"a", "a"}), InvalidGraph);
}

TEST(Admg, BowIsValid) {
  Admg g = make(2, {{0, 1}}, {{0, 1}});
  EXPECT_TRUE(g.has_directed(0, 1));
  EXPECT_TRUE(g.has_bidirected(0, 1));
}
