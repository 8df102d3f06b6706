#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "nmm/equiv.hpp"
#include "nmm/io.hpp"
#include "test_util.hpp"

using namespace nmm;
using testutil::make;

namespace {

const Census& census4() {
  static const Census c = [] {
    Census r = run_census(4);
    check_census(r.summary);
    return r;
  }();
  return c;
}

}  // namespace

TEST(Enumerate, SmallCounts) {
  EXPECT_EQ(enumerate_dags(1).size(), 1u);
  EXPECT_EQ(enumerate_admgs(1).size(), 1u);
  EXPECT_EQ(enumerate_dags(2).size(), 3u);
  EXPECT_EQ(enumerate_admgs(2).size(), 6u);
  EXPECT_EQ(enumerate_dags(3).size(), 25u);
  EXPECT_EQ(enumerate_admgs(3).size(), 200u);
}

TEST(Enumerate, NoDuplicates) {
  std::set<std::string> keys;
  for (const auto& g : enumerate_admgs(3)) EXPECT_TRUE(keys.insert(canonical_key(g)).second);
}

TEST(Census, HeadlineCounts) {
  const auto& s = census4().summary;
  EXPECT_EQ(s.dags, 543u);
  EXPECT_EQ(s.admgs, 34752u);
  EXPECT_EQ(s.ci_classes, 248u);
  EXPECT_EQ(s.ci_classes_dag, 185u);
  EXPECT_EQ(s.ci_classes_mixed, 63u);
  EXPECT_EQ(s.discrepant, 228u);
  EXPECT_EQ(s.conjectured_classes, 84u);
  EXPECT_EQ(s.per_type.at("type_a"), 24u);
  EXPECT_EQ(s.per_type.at("type_b"), 12u);
  EXPECT_EQ(s.per_type.at("type_c"), 24u);
  EXPECT_EQ(s.per_type.at("type_d"), 24u);
  EXPECT_TRUE(s.checked);
  EXPECT_TRUE(s.mismatches.empty());
  EXPECT_NO_THROW(require_census(s));
}

TEST(Census, ClassSizes) {
  std::map<std::string, std::size_t> want{{"type_a", 1}, {"type_b", 1}, {"type_c", 5}, {"type_d", 3}};
  for (const auto& c : census4().classes) EXPECT_EQ(c.members.size(), want.at(c.tag));
}

TEST(Census, DiscrepantHaveFewerNestedParams) {
  for (const auto& r : census4().records) {
    EXPECT_LE(r.nested_dim, r.ordinary_dim);
    EXPECT_LE(r.ordinary_dim, 15u);
    if (r.graph.bidirected_count() == 0) EXPECT_EQ(r.nested_dim, r.ordinary_dim);
    EXPECT_EQ(r.pattern != "none", r.nested_dim != r.ordinary_dim);
  }
}

TEST(Census, TypeCMembersShareTheirCore) {
  // all members share some a -> b -> c together with a <-> c
  for (const auto& cls : census4().classes) {
    if (cls.tag != "type_c") continue;
    const auto d0 = cls.members[0].directed_edges();
    const auto b0 = cls.members[0].bidirected_edges();
    std::set<Edge> dir(d0.begin(), d0.end());
    std::set<Edge> bi(b0.begin(), b0.end());
    for (const auto& g : cls.members) {
      std::set<Edge> d2;
      std::set<Edge> b2;
      for (auto e : g.directed_edges()) {
        if (dir.count(e)) d2.insert(e);
      }
      for (auto e : g.bidirected_edges()) {
        if (bi.count(e)) b2.insert(e);
      }
      dir = d2;
      bi = b2;
    }
    bool found = false;
    for (auto [a, b] : dir) {
      for (auto [c, d] : dir) {
        if (b != c) continue;
        if (bi.count({std::min(a, d), std::max(a, d)})) found = true;
      }
    }
    EXPECT_TRUE(found);
  }
}

TEST(OrdinaryCount, Examples) {
  EXPECT_EQ(ordinary_param_count(testutil::bidirected_chain(4)), 10u);
  EXPECT_EQ(nested_param_count(testutil::bidirected_chain(4)), 10u);
  EXPECT_EQ(ordinary_param_count(testutil::fig1b()), 15u);
  EXPECT_EQ(nested_param_count(testutil::fig1b()), 15u);
  EXPECT_EQ(ordinary_param_count(testutil::verma_admg()), 15u);
  EXPECT_EQ(nested_param_count(testutil::verma_admg()), 13u);
  for (const auto& g : enumerate_dags(4)) ASSERT_EQ(ordinary_param_count(g), nested_param_count(g));
}

TEST(Census, VermaIsDiscrepant) {
  const std::string key = canonical_key(testutil::verma_admg());
  for (const auto& r : census4().records) {
    if (r.key == key) {
      EXPECT_NE(r.nested_dim, r.ordinary_dim);
      EXPECT_EQ(r.pattern, "type_c");
    }
  }
}

TEST(Census, SmallNUnchecked) {
  Census c = run_census(2);
  check_census(c.summary);
  EXPECT_FALSE(c.summary.checked);
  EXPECT_EQ(c.summary.dags, 3u);
  EXPECT_EQ(c.summary.admgs, 6u);
  EXPECT_TRUE(c.classes.empty());
}

TEST(Census, ThreadInvariant) {
  Census a = run_census(3, 1);
  Census b = run_census(3, 3);
  std::ostringstream sa;
  std::ostringstream sb;
  write_census_csv(sa, a);
  write_census_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Census, MismatchIsReported) {
  CensusSummary s = census4().summary;
  s.discrepant = 227;
  check_census(s);
  ASSERT_EQ(s.mismatches.size(), 1u);
  EXPECT_THROW(require_census(s), CensusMismatch);
}

TEST(Census, CsvLayout) {
  std::ostringstream out;
  write_census_csv(out, census4());
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "graph_key,ci_class,nested_dim,ordinary_dim,pattern,conjectured_class");
  std::size_t rows = 0;
  std::size_t tagged = 0;
  while (std::getline(in, line)) {
    ++rows;
    auto cells = detail::split_csv_line(line);
    ASSERT_EQ(cells.size(), 6u);
    tagged += !cells[5].empty();
  }
  EXPECT_EQ(rows, 34752u);
  EXPECT_EQ(tagged, 228u);
}

TEST(Fingerprint, SurvivesJsonRoundTrip) {
  std::mt19937_64 rng(1);
  const auto& recs = census4().records;
  std::uniform_int_distribution<std::size_t> pick(0, recs.size() - 1);
  for (int i = 0; i < 200; ++i) {
    const auto& r = recs[pick(rng)];
    Admg back = io::graph_from_json(io::Json::parse(io::to_json(r.graph).dump()));
    EXPECT_EQ(ci_fingerprint(back), r.fingerprint);
  }
}

TEST(VerifyClasses, WithinClassAgreement) {
  auto rep = verify_classes(census4().classes, 2, 3);
  EXPECT_LT(rep.worst_within, 1e-4);
  EXPECT_GT(rep.min_across, rep.worst_within);
  EXPECT_EQ(rep.fits, 2u * 228u);
}

TEST(VerifyClasses, SaturatedMemberHitsEmpirical) {
  std::mt19937_64 rng(4);
  Dataset d = saturated_dataset(4, 5000, rng);
  EXPECT_NEAR(q_fit(testutil::fig1b(), d).loglik, testutil::empirical_loglik(d), 1e-6);
}
