#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "canopy/cloud.hpp"

namespace canopy::treeseg {

struct SegmentationParams {
  /// Points with blue above this are treated as sky; equality is kept.
  int sky_blue_threshold = 153;
  double max_depth_m = 3.0;
  double ground_band_m = 0.5;
  std::size_t downsample_stride = 10;
  HeightAxis up{};

  void validate() const;
};

ColoredPointCloud remove_sky(const ColoredPointCloud& cloud, const SegmentationParams& params);
/// Keeps 0 < z <= max_depth_m.
ColoredPointCloud clip_depth(const ColoredPointCloud& cloud, const SegmentationParams& params);
/// Drops points lower than (minimum height + ground_band_m). Throws EmptyInput on an empty cloud.
ColoredPointCloud remove_ground(const ColoredPointCloud& cloud, const SegmentationParams& params);
/// Keeps indices 0, stride, 2*stride, ...
ColoredPointCloud downsample(const ColoredPointCloud& cloud, const SegmentationParams& params);

/// remove_sky -> clip_depth -> remove_ground -> downsample.
ColoredPointCloud segment_tree(const ColoredPointCloud& cloud, const SegmentationParams& params);

/// Same pipeline, returning the retained indices into the input cloud.
std::vector<std::size_t> segment_tree_indices(const ColoredPointCloud& cloud, const SegmentationParams& params);

/// Subset of the cloud at the given (ascending) indices; keeps metadata.
ColoredPointCloud select(const ColoredPointCloud& cloud, const std::vector<std::size_t>& indices);

}  // namespace canopy::treeseg
