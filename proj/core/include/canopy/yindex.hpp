#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "canopy/cloud.hpp"

namespace canopy::yindex {

/// (y - g) / (y + g) over Yellow and Green point counts. Trunk and
/// Unassigned points are not counted.
struct YellownessIndex {
  double value = 0.0;
  std::size_t yellow_count = 0;
  std::size_t green_count = 0;
};

/// Throws NoFoliage when y + g == 0.
YellownessIndex from_counts(std::size_t yellow, std::size_t green);
YellownessIndex yellowness(const ClassifiedCloud& classified);
YellownessIndex yellowness(std::span<const Label> labels);

/// Mass-based index from deleafed yellow and green leaf weights.
double ground_truth_index(double yellow_mass_g, double green_mass_g);

/// Keeps points with low <= height < high along the given axis.
ColoredPointCloud crop_band(const ColoredPointCloud& cloud, double low_height_m, double high_height_m,
                            HeightAxis up = {});

struct TreeObservation {
  std::string tree_id;
  int week = 1;
  YellownessIndex index;
  std::optional<double> ground_truth_index;
  std::optional<double> leaf_N_percent;
};

struct ValidationPair {
  std::string tree_id;
  double estimate = 0.0;
  double truth = 0.0;
};

struct ValidationReport {
  /// Coefficient of determination of the least-squares line of truth on estimate.
  double r_squared = 0.0;
  /// 1 - SS(truth - estimate) / SS(truth - mean): agreement with the identity line.
  double r_squared_identity = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  /// truth - estimate, aligned with the input pairs.
  std::vector<double> residuals;
};

/// Needs at least 3 pairs (InsufficientData) and varying truth (DegenerateInput).
ValidationReport validate(std::span<const ValidationPair> pairs);

inline constexpr const char* kObservationHeader = "tree_id,week,y,g,index,ground_truth,leaf_N";

std::string format_observations(std::span<const TreeObservation> observations);
std::vector<TreeObservation> parse_observations(std::string_view text);

}  // namespace canopy::yindex
