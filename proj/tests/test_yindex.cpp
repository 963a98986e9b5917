#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "canopy/error.hpp"
#include "canopy/synth.hpp"
#include "canopy/yindex.hpp"
#include "support/gen.hpp"

using namespace canopy;
using namespace canopy::yindex;
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

}  // namespace

TEST(Index, Examples) {
  EXPECT_EQ(from_counts(0, 10).value, -1.0);
  EXPECT_EQ(from_counts(10, 10).value, 0.0);
  EXPECT_EQ(from_counts(75, 25).value, 0.5);
  EXPECT_EQ(from_counts(3, 0).value, 1.0);
  EXPECT_EQ(kind_of([] { from_counts(0, 0); }), ErrorKind::NoFoliage);
}

TEST(Index, IgnoresTrunkAndUnassigned) {
  const std::vector<Label> labels{Label::Yellow, Label::Trunk, Label::Green, Label::Unassigned, Label::Yellow};
  const auto y = yellowness(labels);
  EXPECT_EQ(y.yellow_count, 2u);
  EXPECT_EQ(y.green_count, 1u);
  EXPECT_DOUBLE_EQ(y.value, 1.0 / 3.0);
  const std::vector<Label> trunk_only(5, Label::Trunk);
  EXPECT_EQ(kind_of([&] { yellowness(trunk_only); }), ErrorKind::NoFoliage);
  ClassifiedCloud c;
  c.labels = labels;
  EXPECT_EQ(kind_of([&] { yellowness(c); }), ErrorKind::Validation);
}

TEST(Index, AntisymmetricScaleInvariantMonotone) {
  for (auto seed : testsupport::seeds(200)) {
    Gen g(seed);
    const auto y = static_cast<std::size_t>(g.integer(0, 5000));
    const auto gr = static_cast<std::size_t>(g.integer(y == 0 ? 1 : 0, 5000));
    const double v = from_counts(y, gr).value;
    ASSERT_GE(v, -1.0);
    ASSERT_LE(v, 1.0);
    ASSERT_DOUBLE_EQ(from_counts(gr, y).value, -v);
    const auto k = static_cast<std::size_t>(g.integer(2, 50));
    ASSERT_DOUBLE_EQ(from_counts(k * y, k * gr).value, v);
    if (gr > 0) {
      ASSERT_GT(from_counts(y + 1, gr).value, v);
    }
    if (y > 0 || gr > 1) {
      ASSERT_LT(from_counts(y, gr + 1).value, v);
    }
  }
}

TEST(GroundTruth, Examples) {
  EXPECT_EQ(ground_truth_index(0, 40), -1.0);
  EXPECT_EQ(ground_truth_index(30, 10), 0.5);
  EXPECT_EQ(ground_truth_index(12.5, 12.5), 0.0);
  EXPECT_EQ(kind_of([] { ground_truth_index(0, 0); }), ErrorKind::NoFoliage);
  EXPECT_EQ(kind_of([] { ground_truth_index(-1, 3); }), ErrorKind::Validation);
}

TEST(CropBand, HalfOpenInterval) {
  ColoredPointCloud c;
  for (float h : {0.0f, 0.99f, 1.0f, 1.5f, 2.0f, 2.5f}) c.points.push_back({h, 0, 1});
  const auto out = crop_band(c, 1.0, 2.0);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.points[0].x, 1.0f);
  EXPECT_EQ(out.points[1].x, 1.5f);
  EXPECT_TRUE(crop_band(c, 3.0, 4.0).empty());
  EXPECT_EQ(kind_of([&] { crop_band(c, 2.0, 1.0); }), ErrorKind::Validation);
  HeightAxis down{UpAxis::X, false};
  EXPECT_EQ(crop_band(c, -2.0, -1.0, down).size(), 2u);  // 1.5 and 2.0
}

TEST(CropBand, WireBandOfGeneratedTree) {
  for (auto seed : testsupport::seeds(5, 17)) {
    synth::SynthTreeSpec spec;
    spec.point_count = 5000;
    spec.seed = seed;
    const auto t = synth::gen_tree(spec);
    const double lo = spec.base_height_m + spec.wire_heights[0];
    const double hi = spec.base_height_m + spec.wire_heights[1];
    std::size_t expected = 0;
    for (const auto& p : t.cloud.points) expected += static_cast<double>(p.x) >= lo && static_cast<double>(p.x) < hi;
    const auto band = crop_band(t.cloud, lo, hi);
    EXPECT_EQ(band.size(), expected);
    EXPECT_GT(band.size(), 0u);
    EXPECT_LT(band.size(), t.cloud.size());
  }
}

namespace {

std::vector<ValidationPair> pairs_of(const std::vector<double>& est, const std::vector<double>& truth) {
  std::vector<ValidationPair> out;
  for (std::size_t i = 0; i < est.size(); ++i) out.push_back({"t" + std::to_string(i), est[i], truth[i]});
  return out;
}

}  // namespace

TEST(Validate, PerfectAgreement) {
  const std::vector<double> v{-0.8, -0.1, 0.3, 0.9};
  const auto r = validate(pairs_of(v, v));
  EXPECT_NEAR(r.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(r.r_squared_identity, 1.0, 1e-12);
  EXPECT_NEAR(r.slope, 1.0, 1e-12);
  EXPECT_NEAR(r.intercept, 0.0, 1e-12);
  for (double res : r.residuals) EXPECT_EQ(res, 0.0);
}

TEST(Validate, ConstantEstimateExplainsNothing) {
  const auto r = validate(pairs_of({0.2, 0.2, 0.2, 0.2}, {-0.5, 0.0, 0.4, 0.9}));
  EXPECT_LE(r.r_squared, 1e-12);
  EXPECT_LE(r.r_squared_identity, 0.0);
  ASSERT_EQ(r.residuals.size(), 4u);
  EXPECT_DOUBLE_EQ(r.residuals[0], -0.7);
}

TEST(Validate, AffineEstimateHasUnitFitButNotIdentity) {
  const std::vector<double> truth{-0.6, -0.2, 0.1, 0.5, 0.7};
  std::vector<double> est;
  for (double t : truth) est.push_back(0.5 * t + 0.1);
  const auto r = validate(pairs_of(est, truth));
  EXPECT_NEAR(r.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(r.slope, 2.0, 1e-12);
  EXPECT_NEAR(r.intercept, -0.2, 1e-12);
  EXPECT_LT(r.r_squared_identity, 1.0);
}

// truth ~ U(-1, 1) has variance 1/3; estimate = truth + N(0, s^2) gives
// E[R^2] ~ (1/3) / (1/3 + s^2) and identity R^2 ~ 1 - 3 s^2.
TEST(Validate, NoisyPairsMatchPopulationValues) {
  for (double s : {0.1, 0.2, 0.4}) {
    Gen g(static_cast<std::uint64_t>(s * 1000));
    std::vector<double> est, truth;
    for (int i = 0; i < 4000; ++i) {
      const double t = g.real(-1, 1);
      truth.push_back(t);
      est.push_back(t + g.normal(0, s));
    }
    const auto r = validate(pairs_of(est, truth));
    EXPECT_NEAR(r.r_squared, (1.0 / 3.0) / (1.0 / 3.0 + s * s), 0.05) << s;
    EXPECT_NEAR(r.r_squared_identity, 1.0 - 3.0 * s * s, 0.05) << s;
  }
}

TEST(Validate, Errors) {
  EXPECT_EQ(kind_of([] { validate(pairs_of({0.1, 0.2}, {0.1, 0.3})); }), ErrorKind::InsufficientData);
  EXPECT_EQ(kind_of([] { validate(pairs_of({0.1, 0.2, 0.5}, {0.3, 0.3, 0.3})); }), ErrorKind::DegenerateInput);
}

TEST(Observations, RoundTrip) {
  for (auto seed : testsupport::seeds(20, 3)) {
    Gen g(seed);
    std::vector<TreeObservation> obs;
    const auto n = g.integer(0, 30);
    for (long long i = 0; i < n; ++i) {
      TreeObservation o;
      o.tree_id = "T" + std::to_string(g.integer(1, 99));
      o.week = static_cast<int>(g.integer(1, 8));
      o.index = from_counts(static_cast<std::size_t>(g.integer(0, 900)), static_cast<std::size_t>(g.integer(1, 900)));
      if (g.coin()) o.ground_truth_index = g.real(-1, 1);
      if (g.coin()) o.leaf_N_percent = g.real(1.4, 3.0);
      obs.push_back(o);
    }
    const auto text = format_observations(obs);
    EXPECT_EQ(text.substr(0, text.find('\n')), kObservationHeader);
    const auto back = parse_observations(text);
    ASSERT_EQ(back.size(), obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      ASSERT_EQ(back[i].tree_id, obs[i].tree_id);
      ASSERT_EQ(back[i].week, obs[i].week);
      ASSERT_EQ(back[i].index.yellow_count, obs[i].index.yellow_count);
      ASSERT_EQ(back[i].index.green_count, obs[i].index.green_count);
      ASSERT_EQ(back[i].ground_truth_index, obs[i].ground_truth_index);
      ASSERT_EQ(back[i].leaf_N_percent, obs[i].leaf_N_percent);
    }
    ASSERT_EQ(format_observations(back), text);
  }
}

TEST(Observations, BadInput) {
  EXPECT_EQ(kind_of([] { parse_observations("tree,week\n"); }), ErrorKind::Parse);
  const std::string h = std::string(kObservationHeader) + "\n";
  EXPECT_EQ(kind_of([&] { parse_observations(h + "T1,1,2,3\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([&] { parse_observations(h + "T1,0,2,3,0,,\n"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([&] { parse_observations(h + "T1,1,2,3,0,1.5,\n"); }), ErrorKind::Validation);
}
