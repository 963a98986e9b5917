#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "canopy/cluster.hpp"
#include "canopy/features.hpp"
#include "canopy/gboost.hpp"
#include "canopy/treeseg.hpp"

namespace canopy {

enum class Method { KMeans, Gbm };
const char* to_string(Method m) noexcept;
/// "kmeans" or "gbm"; Validation otherwise.
Method parse_method(std::string_view text);

struct SweepGrid {
  std::vector<double> learning_rates;
  std::vector<int> max_depths;
  std::vector<int> n_estimators;
};

/// Every field defaults to the published constants: sky 153, depth 3 m,
/// ground band 0.5 m, stride 10, 20 clusters, 2023 windows, GBM lr 0.1 /
/// depth 1 / 100 trees.
struct RunConfig {
  treeseg::SegmentationParams segmentation{};
  /// Segment clouds before classifying in index/validate.
  bool segment = true;
  int clusters = cluster::kDefaultClusters;
  cluster::MergeWindows windows{};
  Method method = Method::KMeans;
  features::FeatureSchema schema{};
  gboost::GbmHyperparams gbm{};
  std::optional<std::filesystem::path> model_path;
  /// When set, train runs a sweep instead of a single fit.
  std::optional<SweepGrid> sweep;
  double train_fraction = 0.8;
  /// Validation crop band in camera-frame height coordinates.
  double band_low_m = -0.2;
  double band_high_m = 0.8;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 0;
  int workers = 1;
  int timing_runs = 5;

  void validate() const;
};

/// Unknown keys are rejected. Relative model and output paths resolve
/// against base_dir.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const RunConfig& config);

}  // namespace canopy
