#include <cmath>
#include <functional>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "canopy/error.hpp"
#include "canopy/fieldstats.hpp"
#include "canopy/special_functions.hpp"
#include "support/gen.hpp"
#include "support/oracles.hpp"

using namespace canopy;
using namespace canopy::fieldstats;
using testsupport::Gen;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

double rel(double got, long double want) {
  const long double d = std::fabs(static_cast<long double>(got) - want);
  return static_cast<double>(want == 0 ? d : d / std::fabs(want));
}

std::vector<std::vector<double>> random_groups(Gen& g, int k, int max_n, double spread) {
  std::vector<std::vector<double>> groups(static_cast<std::size_t>(k));
  for (auto& grp : groups) {
    const double mu = g.normal(0, spread);
    const auto n = g.integer(2, max_n);
    for (long long i = 0; i < n; ++i) grp.push_back(g.normal(mu, 1.0));
  }
  return groups;
}

}  // namespace

TEST(Groups, BoundariesAreLowerInclusive) {
  EXPECT_EQ(assign_group(1.5), NitrogenGroup::VeryLow);
  EXPECT_EQ(assign_group(1.7), NitrogenGroup::Low);
  EXPECT_EQ(assign_group(1.99), NitrogenGroup::Low);
  EXPECT_EQ(assign_group(2.0), NitrogenGroup::Good);
  EXPECT_EQ(assign_group(2.39), NitrogenGroup::Good);
  EXPECT_EQ(assign_group(2.4), NitrogenGroup::High);
  EXPECT_EQ(assign_group(2.6), NitrogenGroup::VeryHigh);
  EXPECT_EQ(assign_group(3.5), NitrogenGroup::VeryHigh);
  EXPECT_EQ(kind_of([] { assign_group(0.0); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([] { assign_group(std::nan("")); }), ErrorKind::Validation);
}

TEST(Pearson, Examples) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_NEAR(pearson(x, std::vector<double>{2, 4, 6, 8, 10}), 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0, 1e-15);
  EXPECT_NEAR(pearson(x, std::vector<double>{1, 3, 2, 3, 1}), 0.0, 1e-15);
  EXPECT_EQ(kind_of([&] { pearson(x, std::vector<double>{1, 1, 1, 1, 1}); }), ErrorKind::DegenerateInput);
  EXPECT_EQ(kind_of([&] { pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}); }), ErrorKind::InsufficientData);
  EXPECT_EQ(kind_of([&] { pearson(x, std::vector<double>{1, 2, 3}); }), ErrorKind::Validation);
}

TEST(Pearson, MatchesOracleAndAffineInvariant) {
  for (auto seed : testsupport::seeds(50)) {
    Gen g(seed);
    std::vector<double> x, y;
    const auto n = g.integer(3, 60);
    for (long long i = 0; i < n; ++i) {
      x.push_back(g.normal(2.2, 0.4));
      y.push_back(0.5 * x.back() + g.normal(0, 0.3));
    }
    const double r = pearson(x, y);
    ASSERT_LE(rel(r, oracle::pearson(x, y)), 1e-12) << seed;
    const double a = g.real(0.1, 10), b = g.real(-5, 5), c = g.real(0.1, 10), d = g.real(-5, 5);
    std::vector<double> xa, ya;
    for (std::size_t i = 0; i < x.size(); ++i) {
      xa.push_back(a * x[i] + b);
      ya.push_back(c * y[i] + d);
    }
    ASSERT_NEAR(pearson(xa, ya), r, 1e-9);
    for (auto& v : ya) v = -v;
    ASSERT_NEAR(pearson(xa, ya), -r, 1e-9);
  }
}

TEST(Anova, EqualMeansGiveZeroF) {
  const std::vector<std::vector<double>> groups{{1, 2, 3}, {0, 2, 4}, {2, 2.5, 1.5}};
  const auto r = anova_oneway(groups);
  EXPECT_NEAR(r.F, 0.0, 1e-12);
  EXPECT_NEAR(r.p, 1.0, 1e-12);
  EXPECT_EQ(r.df_between, 2.0);
  EXPECT_EQ(r.df_within, 6.0);
}

TEST(Anova, SeparatedGroupsAreSignificant) {
  Gen g(3);
  std::vector<std::vector<double>> groups(3);
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 10; ++i) groups[static_cast<std::size_t>(k)].push_back(g.normal(100.0 * k, 1.0));
  EXPECT_LT(anova_oneway(groups).p, 1e-6);
}

TEST(Anova, MatchesOracle) {
  for (auto seed : testsupport::seeds(40, 9)) {
    Gen g(seed);
    const auto groups = random_groups(g, static_cast<int>(g.integer(2, 5)), 40, g.real(0, 1.5));
    const auto r = anova_oneway(groups);
    const auto o = oracle::anova(groups);
    ASSERT_LE(rel(r.F, o.F), 1e-9) << seed;
    ASSERT_LE(rel(r.p, o.p), 1e-9) << seed << " F=" << r.F;
    ASSERT_LE(rel(r.ms_within, o.ms_within), 1e-9);
    ASSERT_EQ(r.df_between, static_cast<double>(o.df_between));
    ASSERT_EQ(r.df_within, static_cast<double>(o.df_within));
  }
}

TEST(Anova, InvariantUnderCommonShift) {
  for (auto seed : testsupport::seeds(20, 10)) {
    Gen g(seed);
    auto groups = random_groups(g, 4, 20, 1.0);
    const auto r = anova_oneway(groups);
    const double c = g.real(-50, 50);
    for (auto& grp : groups)
      for (auto& x : grp) x += c;
    const auto s = anova_oneway(groups);
    ASSERT_LE(rel(s.F, r.F), 1e-8);
    ASSERT_NEAR(s.p, r.p, 1e-8);
  }
}

TEST(Anova, Errors) {
  const std::vector<std::vector<double>> one{{1, 2, 3}};
  EXPECT_EQ(kind_of([&] { anova_oneway(one); }), ErrorKind::InsufficientData);
  const std::vector<std::vector<double>> tiny{{1, 2}, {3}};
  EXPECT_EQ(kind_of([&] { anova_oneway(tiny); }), ErrorKind::InsufficientData);
  const std::vector<std::vector<double>> flat{{1, 1}, {2, 2}};
  EXPECT_EQ(kind_of([&] { anova_oneway(flat); }), ErrorKind::DegenerateInput);
}

TEST(Tukey, PairCountAndOracle) {
  for (auto seed : testsupport::seeds(6, 12)) {
    Gen g(seed);
    const int k = static_cast<int>(g.integer(2, 5));
    const auto groups = random_groups(g, k, 30, 1.0);
    const auto pairs = tukey_hsd(groups);
    ASSERT_EQ(pairs.size(), static_cast<std::size_t>(k * (k - 1) / 2));
    const auto o = oracle::anova(groups);
    for (const auto& p : pairs) {
      ASSERT_LT(p.group_1, p.group_2);
      const long double diff = oracle::mean(groups[p.group_2]) - oracle::mean(groups[p.group_1]);
      const long double se = std::sqrt(o.ms_within / 2 *
                                       (1.0L / groups[p.group_1].size() + 1.0L / groups[p.group_2].size()));
      const long double q = std::fabs(diff) / se;
      ASSERT_LE(rel(p.mean_difference, diff), 1e-9);
      ASSERT_LE(rel(p.q, q), 1e-9);
      ASSERT_LE(rel(p.p_adjusted, oracle::studentized_range_sf(q, k, o.df_within)), 1e-9) << "q=" << p.q;
      ASSERT_EQ(p.significant, p.p_adjusted < 0.05);
    }
  }
}

TEST(Tukey, OutlierGroupIsTheOnlySeparatedOne) {
  Gen g(14);
  std::vector<std::vector<double>> groups(4);
  for (std::size_t k = 0; k < 4; ++k)
    for (int i = 0; i < 15; ++i) groups[k].push_back(g.normal(k == 2 ? 10.0 : 0.0, 1.0));
  for (const auto& p : tukey_hsd(groups)) {
    const bool involves = p.group_1 == 2 || p.group_2 == 2;
    EXPECT_EQ(p.significant, involves) << p.group_1 << "-" << p.group_2;
  }
}

TEST(Tukey, IdenticalGroupsAreNotSignificant) {
  const std::vector<double> base{0.1, -0.3, 0.25, 0.9, -0.5};
  const std::vector<std::vector<double>> groups{base, base, base};
  for (const auto& p : tukey_hsd(groups)) {
    EXPECT_EQ(p.q, 0.0);
    EXPECT_NEAR(p.p_adjusted, 1.0, 1e-9);
    EXPECT_FALSE(p.significant);
  }
}

// The family-wise adjustment can only remove significance relative to an
// unadjusted pooled-variance t test on the same pair.
TEST(Tukey, SignificantPairsAreSubsetOfPooledT) {
  for (auto seed : testsupport::seeds(8, 15)) {
    Gen g(seed);
    const auto groups = random_groups(g, 4, 15, 1.0);
    const auto o = oracle::anova(groups);
    for (const auto& p : tukey_hsd(groups)) {
      const long double t = p.q / std::sqrt(2.0L);
      const long double p_t = oracle::f_sf(t * t, 1, o.df_within);
      ASSERT_GE(p.p_adjusted, static_cast<double>(p_t) - 1e-12);
      if (p.significant) {
        ASSERT_LT(p_t, 0.05L);
      }
    }
  }
}

TEST(SpecialFunctions, AgreeWithOracles) {
  for (double f : {0.01, 0.5, 1.0, 3.7, 20.0})
    for (auto [d1, d2] : {std::pair{1.0, 5.0}, {2.0, 17.0}, {4.0, 30.0}, {3.0, 195.0}})
      EXPECT_LE(rel(stats::f_sf(f, d1, d2), oracle::f_sf(f, d1, d2)), 1e-10) << f << " " << d1 << " " << d2;
  for (double w : {0.5, 2.0, 4.0, 6.0})
    for (int k : {2, 3, 5}) EXPECT_LE(rel(stats::normal_range_sf(w, k), oracle::normal_range_sf(w, k)), 1e-10);
  for (double z : {-3.0, 0.0, 1.96, 5.0}) EXPECT_LE(rel(stats::normal_sf(z), oracle::upper_normal(z)), 1e-12);
  // t^2 with 1 numerator degree of freedom is F.
  EXPECT_LE(rel(stats::t_two_sided_p(2.1, 12), oracle::f_sf(2.1L * 2.1L, 1, 12)), 1e-10);
  EXPECT_NEAR(stats::regularized_beta(0.3, 1, 1), 0.3, 1e-14);
  EXPECT_NEAR(stats::regularized_beta(0.5, 2.5, 2.5), 0.5, 1e-14);
}

namespace {

pcio::TreeManifest manifest_with(const std::vector<std::pair<std::string, std::optional<double>>>& trees) {
  pcio::TreeManifest m;
  m.season = "test";
  int pos = 0;
  for (const auto& [id, n] : trees) {
    pcio::ManifestEntry e;
    e.tree_id = id;
    e.row = 1 + pos / 5;
    e.position_in_row = 1 + pos % 5;
    e.leaf_N_percent = n;
    m.entries.push_back(e);
    ++pos;
  }
  return m;
}

yindex::TreeObservation obs(const std::string& id, int week, std::size_t y, std::size_t g) {
  yindex::TreeObservation o;
  o.tree_id = id;
  o.week = week;
  o.index = yindex::from_counts(y, g);
  return o;
}

}  // namespace

TEST(WeeklyReport, FiveSeparatedGroups) {
  const double ns[] = {1.5, 1.8, 2.2, 2.5, 2.8};
  std::vector<std::pair<std::string, std::optional<double>>> trees;
  std::vector<yindex::TreeObservation> observations;
  Gen g(20);
  for (int grp = 0; grp < 5; ++grp) {
    for (int i = 0; i < 5; ++i) {
      const auto id = "T" + std::to_string(grp * 5 + i);
      trees.push_back({id, ns[grp] + 0.01 * i});
      const auto yellow = static_cast<std::size_t>(900 - 200 * grp + g.integer(-20, 20));
      observations.push_back(obs(id, 4, yellow, 1000 - yellow));
    }
  }
  const auto report = weekly_report(observations, manifest_with(trees));
  ASSERT_EQ(report.weeks.size(), 1u);
  const auto& w = report.weeks[0];
  EXPECT_EQ(w.week, 4);
  EXPECT_EQ(w.tested_groups.size(), 5u);
  ASSERT_TRUE(w.anova.has_value());
  EXPECT_LT(w.anova->p, 0.05);
  EXPECT_EQ(w.tukey.size(), 10u);
  ASSERT_TRUE(w.pearson_r.has_value());
  EXPECT_LT(*w.pearson_r, -0.9);
  EXPECT_EQ(w.trees_with_N, 25u);
  EXPECT_EQ(report.map.size(), 25u);
  const auto j = report_to_json(report);
  EXPECT_EQ(j["weeks"][0]["tukey"].size(), 10u);
}

TEST(WeeklyReport, MissingNitrogenGivesMapsOnly) {
  const auto m = manifest_with({{"A", std::nullopt}, {"B", std::nullopt}, {"C", std::nullopt}});
  const std::vector<yindex::TreeObservation> observations{obs("A", 1, 5, 5), obs("B", 1, 1, 9), obs("C", 1, 9, 1)};
  const auto report = weekly_report(observations, m);
  ASSERT_EQ(report.weeks.size(), 1u);
  EXPECT_FALSE(report.weeks[0].anova.has_value());
  EXPECT_FALSE(report.weeks[0].pearson_r.has_value());
  EXPECT_FALSE(report.weeks[0].warnings.empty());
  EXPECT_EQ(report.map.size(), 3u);
  const auto csv = format_map_csv(report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kMapHeader);
  EXPECT_NE(csv.find("1,A,1,1,0,\n"), std::string::npos);
}

TEST(WeeklyReport, TwoWeeksTwoSections) {
  const auto m = manifest_with({{"A", 1.5}, {"B", 1.6}, {"C", 2.7}, {"D", 2.8}});
  std::vector<yindex::TreeObservation> observations;
  for (int week : {3, 1})
    for (const char* id : {"A", "B", "C", "D"}) observations.push_back(obs(id, week, id[0] == 'A' ? 3u : 5u, 7));
  const auto report = weekly_report(observations, m);
  ASSERT_EQ(report.weeks.size(), 2u);
  EXPECT_EQ(report.weeks[0].week, 1);
  EXPECT_EQ(report.weeks[1].week, 3);
  EXPECT_EQ(report.map.size(), 8u);
}

TEST(WeeklyReport, WarningsForSmallGroupsAndUnknownTrees) {
  const auto m = manifest_with({{"A", 1.5}, {"B", 1.55}, {"C", 2.2}, {"D", 2.3}, {"E", 2.9}});
  const std::vector<yindex::TreeObservation> observations{obs("A", 2, 1, 9), obs("B", 2, 2, 8), obs("C", 2, 5, 5),
                                                          obs("D", 2, 6, 4), obs("E", 2, 9, 1), obs("Z", 2, 9, 1)};
  const auto report = weekly_report(observations, m);
  const auto& w = report.weeks[0];
  EXPECT_EQ(w.tested_groups, (std::vector<NitrogenGroup>{NitrogenGroup::VeryLow, NitrogenGroup::Good}));
  EXPECT_EQ(w.group_sizes.at(NitrogenGroup::VeryHigh), 1u);
  EXPECT_FALSE(w.warnings.empty());
  ASSERT_EQ(report.warnings.size(), 1u);
  EXPECT_NE(report.warnings[0].find("Z"), std::string::npos);
  EXPECT_EQ(report.map.size(), 5u);
  EXPECT_EQ(kind_of([&] { weekly_report({}, m); }), ErrorKind::InsufficientData);
}

TEST(WeeklyReport, ObservationNitrogenOverridesManifest) {
  const auto m = manifest_with({{"A", std::nullopt}, {"B", std::nullopt}, {"C", std::nullopt}, {"D", std::nullopt}});
  std::vector<yindex::TreeObservation> observations{obs("A", 1, 1, 9), obs("B", 1, 2, 8), obs("C", 1, 7, 3),
                                                    obs("D", 1, 8, 2)};
  const double ns[] = {2.7, 2.8, 1.5, 1.6};
  for (std::size_t i = 0; i < 4; ++i) observations[i].leaf_N_percent = ns[i];
  const auto report = weekly_report(observations, m);
  ASSERT_TRUE(report.weeks[0].anova.has_value());
  EXPECT_EQ(report.weeks[0].trees_with_N, 4u);
}
