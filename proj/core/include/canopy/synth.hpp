#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "canopy/cloud.hpp"
#include "canopy/pcio.hpp"
#include "canopy/treeseg.hpp"

namespace canopy::synth {

using Rgb = std::array<std::uint8_t, 3>;

// Base colors sit inside the 2023 merge windows: green hue ~110, a* -18.7,
// b* 16.4; yellow hue ~49, b* 65; trunk a* 11.3, b* 20.3.
inline constexpr Rgb kGreenBase{124, 156, 118};
inline constexpr Rgb kYellowBase{200, 170, 40};
inline constexpr Rgb kTrunkBase{120, 85, 60};

struct SynthTreeSpec {
  /// Tree top above the tree base.
  double height_m = 2.5;
  /// Height of the bare trunk below the crown.
  double trunk_height_m = 0.6;
  double crown_width_m = 1.2;
  double crown_depth_m = 0.8;
  /// Camera-frame depth of the trunk axis.
  double depth_m = 1.6;
  /// Height coordinate of the tree base in the camera frame.
  double base_height_m = -1.2;
  std::size_t point_count = 20000;
  double yellow_fraction = 0.0;
  double trunk_fraction = 0.1;
  /// Per-channel Gaussian color noise in sRGB units.
  double color_sigma = 3.0;
  /// Trellis wire heights above the tree base; the band between the first
  /// two is the ground-truth crop band.
  std::vector<double> wire_heights{1.0, 2.0};
  std::uint64_t seed = 0;
  HeightAxis up{};

  /// Fractions in [0, 1], positive sizes, sorted nonnegative wire heights.
  void validate() const;
};

struct ClassCounts {
  std::size_t green = 0;
  std::size_t yellow = 0;
  std::size_t trunk = 0;
};

/// trunk = round(trunk_fraction * n), yellow = round(yellow_fraction * foliage).
ClassCounts class_counts(const SynthTreeSpec& spec);

struct SynthTree {
  ColoredPointCloud cloud;
  std::vector<Label> labels;
  ClassCounts counts;
  /// (y - g) / (y + g) over the generated labels.
  double true_index = 0.0;
};

/// Trunk cylinder plus ellipsoidal crown, labels shuffled over point order.
SynthTree gen_tree(const SynthTreeSpec& spec);

enum class Source : std::uint8_t { Tree, Sky, Background, Ground };
const char* to_string(Source s) noexcept;

struct SynthSceneSpec {
  SynthTreeSpec tree;
  /// Filter constants the scene is built around.
  treeseg::SegmentationParams filters{};
  std::size_t sky_points = 3000;
  std::size_t background_points = 4000;
  std::size_t ground_points = 3000;
  Rgb sky_color{135, 190, 235};
  /// Sky blue stays at least this far above the sky threshold.
  int blue_margin = 10;
  /// Background starts this far beyond the depth threshold.
  double depth_margin_m = 0.3;
  /// Ground strip is this much thinner than the ground band, and the tree
  /// starts this far above it.
  double ground_margin_m = 0.1;
  double background_extent_m = 2.0;

  void validate() const;
};

struct SynthScene {
  ColoredPointCloud cloud;
  std::vector<Source> provenance;
  /// Unassigned for non-tree points.
  std::vector<Label> labels;
};

/// Tree, sky, background row and ground strip, interleaved in a seeded order.
SynthScene gen_scene(const SynthSceneSpec& spec);

struct SeasonTree {
  std::string tree_id;
  int row = 0;
  int position_in_row = 0;
  double leaf_N_percent = 2.2;
};

struct SynthSeasonSpec {
  std::string season = "synthetic";
  std::vector<SeasonTree> trees;
  int weeks = 6;
  SynthSceneSpec scene{};
  /// Logistic midpoint (week) at N = reference_N.
  double onset_week = 3.5;
  double reference_N = 2.2;
  /// Weeks of onset delay per +1 % N.
  double onset_shift_per_N = 2.5;
  double transition_width_weeks = 0.7;
  /// Yellow fraction at week 0 and the maximum fraction reached.
  double floor_fraction = 0.0;
  double ceiling_fraction = 1.0;
  /// Leaf mass represented by one foliage point, for ground-truth masses.
  double grams_per_point = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  double yellow_fraction(double leaf_N_percent, int week) const;
};

/// n trees in rows of `per_row`, N spread evenly over [1.5, 2.9] and assigned
/// to positions by a seeded shuffle.
SynthSeasonSpec default_season(std::size_t n_trees, int weeks, std::uint64_t seed, std::size_t per_row = 5);

struct SeasonCloud {
  std::size_t tree = 0;
  int week = 0;
  double yellow_fraction = 0.0;
  double true_index = 0.0;
  SynthScene scene;
};

struct SynthSeason {
  pcio::TreeManifest manifest;
  std::vector<SeasonCloud> clouds;
};

/// Clouds per tree-week. Ground-truth leaf masses come from the Green and
/// Yellow points of the final week inside the first wire band.
SynthSeason gen_season(const SynthSeasonSpec& spec);

/// Writes clouds/<tree>_w<week>.ply, manifest.json and truth.csv under dir.
void write_season(const SynthSeason& season, const std::filesystem::path& dir);

inline constexpr const char* kTruthHeader = "tree_id,week,leaf_N,yellow_fraction,true_index";

/// Labeled records drawn from a generated tree: `per_class` points per class,
/// each with full color and eigen columns.
pcio::LabelDataset gen_label_dataset(const SynthTreeSpec& spec, std::size_t per_class, int neighbors = 30);

}  // namespace canopy::synth
