#include <functional>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "canopy/config.hpp"
#include "canopy/error.hpp"
#include "canopy/pcio.hpp"
#include "support/gen.hpp"

using namespace canopy;
using testsupport::TempDir;

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

TEST(Config, EmptyObjectGivesPublishedDefaults) {
  const auto c = parse_config("{}");
  EXPECT_EQ(c.segmentation.sky_blue_threshold, 153);
  EXPECT_EQ(c.segmentation.max_depth_m, 3.0);
  EXPECT_EQ(c.segmentation.ground_band_m, 0.5);
  EXPECT_EQ(c.segmentation.downsample_stride, 10u);
  EXPECT_EQ(c.clusters, 20);
  EXPECT_EQ(c.method, Method::KMeans);
  EXPECT_EQ(c.gbm, gboost::GbmHyperparams{});
  EXPECT_EQ(c.gbm.learning_rate, 0.1);
  EXPECT_EQ(c.gbm.max_depth, 1);
  EXPECT_EQ(c.gbm.n_estimators, 100);
  EXPECT_EQ(c.windows.green.a_max, -10.0);
  EXPECT_EQ(c.schema.arity(), 5u);
  EXPECT_EQ(c.workers, 1);
  EXPECT_EQ(c.timing_runs, 5);
  EXPECT_FALSE(c.sweep.has_value());
}

TEST(Config, FullDocument) {
  const auto c = parse_config(R"({
    "segmentation": {"sky_blue_threshold": 140, "max_depth_m": 2.5, "ground_band_m": 0.3,
                     "downsample_stride": 4, "up_axis": "-y"},
    "index": {"segment": false},
    "kmeans": {"clusters": 12},
    "method": "gbm",
    "gbm": {"learning_rate": 0.5, "max_depth": 3, "n_estimators": 50},
    "sweep": "standard",
    "train_fraction": 0.7,
    "band": {"low_m": 0.0, "high_m": 1.0},
    "seed": 42,
    "workers": 3,
    "timing": {"runs": 7}
  })");
  EXPECT_EQ(c.segmentation.sky_blue_threshold, 140);
  EXPECT_EQ(c.segmentation.downsample_stride, 4u);
  EXPECT_EQ(c.segmentation.up, (HeightAxis{UpAxis::Y, false}));
  EXPECT_FALSE(c.segment);
  EXPECT_EQ(c.clusters, 12);
  EXPECT_EQ(c.method, Method::Gbm);
  EXPECT_EQ(c.gbm.max_depth, 3);
  ASSERT_TRUE(c.sweep.has_value());
  EXPECT_EQ(c.sweep->max_depths.size(), 5u);
  EXPECT_EQ(c.train_fraction, 0.7);
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.workers, 3);
  EXPECT_EQ(c.timing_runs, 7);
  // Serialized form parses back to the same values.
  const auto again = parse_config(config_to_json(c).dump());
  EXPECT_EQ(config_to_json(again), config_to_json(c));
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_EQ(kind_of([] { parse_config(R"({"colour": 1})"); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([] { parse_config(R"({"segmentation": {"sky": 1}})"); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([] { parse_config(R"({"gbm": {"depth": 2}})"); }), ErrorKind::Validation);
}

TEST(Config, InvalidValues) {
  EXPECT_EQ(kind_of([] { parse_config("{"); }), ErrorKind::Parse);
  EXPECT_EQ(kind_of([] { parse_config(R"({"method": "svm"})"); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([] { parse_config(R"({"workers": 0})"); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([] { parse_config(R"({"timing": {"runs": 4}})"); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([] { parse_config(R"({"gbm": {"max_depth": 0}})"); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([] { parse_config(R"({"segmentation": {"up_axis": "z"}})"); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([] { parse_config(R"({"band": {"low_m": 1, "high_m": 0}})"); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([] { parse_config(R"({"seed": "abc"})"); }), ErrorKind::Validation);
  EXPECT_EQ(kind_of([] { parse_config(R"({"sweep": "huge"})"); }), ErrorKind::Validation);
}

TEST(Config, RelativePathsResolveAgainstConfigDirectory) {
  TempDir dir;
  std::filesystem::create_directories(dir / "conf");
  pcio::write_file_atomic(dir / "conf" / "run.json", R"({"out": "../results", "model_path": "m/model.json"})");
  const auto c = load_config(dir / "conf" / "run.json");
  EXPECT_EQ(c.out_dir, (dir / "results").lexically_normal());
  ASSERT_TRUE(c.model_path.has_value());
  EXPECT_EQ(*c.model_path, dir / "conf" / "m/model.json");
  const auto abs = parse_config(R"({"out": "/tmp/x"})", dir / "conf");
  EXPECT_EQ(abs.out_dir, std::filesystem::path("/tmp/x"));
  EXPECT_EQ(kind_of([&] { load_config(dir / "missing.json"); }), ErrorKind::Io);
}

TEST(Method, Names) {
  EXPECT_EQ(parse_method("kmeans"), Method::KMeans);
  EXPECT_EQ(parse_method("gbm"), Method::Gbm);
  EXPECT_STREQ(to_string(Method::Gbm), "gbm");
  EXPECT_EQ(kind_of([] { parse_method("KMeans"); }), ErrorKind::Validation);
}
