#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "canopy/cloud.hpp"

namespace canopy::cluster {

/// A point in the (a*, b*) chromaticity plane.
struct AbPoint {
  double a = 0.0;
  double b = 0.0;
};

/// Closed box in (a*, b*); infinite bounds are open-ended.
struct Window {
  double a_min = -std::numeric_limits<double>::infinity();
  double a_max = std::numeric_limits<double>::infinity();
  double b_min = -std::numeric_limits<double>::infinity();
  double b_max = std::numeric_limits<double>::infinity();

  bool contains(const AbPoint& p) const noexcept {
    return a_min <= p.a && p.a <= a_max && b_min <= p.b && p.b <= b_max;
  }
  bool intersects(const Window& other) const noexcept;
};

/// Threshold windows that map cluster centers to classes. A center is tested
/// against green, then yellow, then trunk; the first containing window wins.
struct MergeWindows {
  Window green{-std::numeric_limits<double>::infinity(), -10.0, 0.0, 25.0};
  Window yellow{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 45.0,
                std::numeric_limits<double>::infinity()};
  Window trunk{0.0, std::numeric_limits<double>::infinity(), 0.0, 50.0};

  /// The 2023 season windows.
  static MergeWindows season_2023() { return {}; }

  /// Rejects windows with min > max or NaN bounds.
  void validate() const;
  /// Pairs of classes whose windows intersect; precedence decides those regions.
  std::vector<std::pair<Label, Label>> overlaps() const;

  Label classify(const AbPoint& center) const noexcept;
};

/// Keys per class: a_min, a_max, b_min, b_max, or a/b as [min, max]. Missing
/// or null bounds are unbounded; classes absent from the document keep the
/// 2023 defaults.
void to_json(nlohmann::json& j, const MergeWindows& windows);
void from_json(const nlohmann::json& j, MergeWindows& windows);

struct KMeansOptions {
  double tolerance = 1e-6;
  int max_iterations = 300;
};

struct KMeansResult {
  std::vector<AbPoint> centers;
  std::vector<std::uint32_t> assignments;
  /// Sum of squared distances after each assignment step.
  std::vector<double> objective_history;
  int iterations = 0;
  bool converged = false;
};

/// Lloyd's algorithm from k-means++ seeding driven by `seed`. Ties in the
/// assignment step go to the lowest center index. Throws DegenerateInput
/// when there are fewer points than clusters.
KMeansResult kmeans_ab(std::span<const AbPoint> points, int n, std::uint64_t seed, const KMeansOptions& options = {});

/// Per-point labels from cluster centers via the merge windows.
std::vector<Label> merge_clusters(std::span<const AbPoint> centers, std::span<const std::uint32_t> assignments,
                                  const MergeWindows& windows);

inline constexpr int kDefaultClusters = 20;

/// Lab conversion, k-means over (a*, b*), then window merging.
ClassifiedCloud classify_kmeans(const ColoredPointCloud& cloud, int n, const MergeWindows& windows,
                                std::uint64_t seed);

std::vector<AbPoint> ab_coordinates(const ColoredPointCloud& cloud);

}  // namespace canopy::cluster
