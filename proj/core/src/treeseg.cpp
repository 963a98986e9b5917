#include "canopy/treeseg.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "canopy/error.hpp"

namespace canopy::treeseg {

namespace {

using Indices = std::vector<std::size_t>;

template <typename Pred>
Indices filter(const ColoredPointCloud& cloud, const Indices& in, Pred keep) {
  Indices out;
  out.reserve(in.size());
  for (auto i : in)
    if (keep(cloud.points[i])) out.push_back(i);
  return out;
}

Indices all_indices(const ColoredPointCloud& cloud) {
  Indices idx(cloud.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

Indices sky_step(const ColoredPointCloud& c, const Indices& in, const SegmentationParams& p) {
  return filter(c, in, [t = p.sky_blue_threshold](const Point& pt) { return pt.b <= t; });
}

Indices depth_step(const ColoredPointCloud& c, const Indices& in, const SegmentationParams& p) {
  return filter(c, in, [d = p.max_depth_m](const Point& pt) { return pt.z > 0.0f && pt.z <= d; });
}

Indices ground_step(const ColoredPointCloud& c, const Indices& in, const SegmentationParams& p) {
  if (in.empty()) throw Error(ErrorKind::EmptyInput, "remove_ground on an empty cloud");
  if (p.ground_band_m == 0.0) return in;
  double h_min = std::numeric_limits<double>::infinity();
  for (auto i : in) h_min = std::min(h_min, static_cast<double>(p.up.height(c.points[i])));
  const double cutoff = h_min + p.ground_band_m;
  return filter(c, in, [&](const Point& pt) { return static_cast<double>(p.up.height(pt)) >= cutoff; });
}

Indices stride_step(const Indices& in, const SegmentationParams& p) {
  Indices out;
  out.reserve(in.size() / p.downsample_stride + 1);
  for (std::size_t i = 0; i < in.size(); i += p.downsample_stride) out.push_back(in[i]);
  return out;
}

}  // namespace

void SegmentationParams::validate() const {
  if (sky_blue_threshold < 0 || sky_blue_threshold > 255)
    throw Error(ErrorKind::Validation, "sky_blue_threshold must lie in 0-255");
  if (!(max_depth_m > 0.0)) throw Error(ErrorKind::Validation, "max_depth_m must be positive");
  if (!(ground_band_m >= 0.0)) throw Error(ErrorKind::Validation, "ground_band_m must be nonnegative");
  if (downsample_stride < 1) throw Error(ErrorKind::Validation, "downsample_stride must be >= 1");
}

ColoredPointCloud select(const ColoredPointCloud& cloud, const std::vector<std::size_t>& indices) {
  ColoredPointCloud out;
  out.source_id = cloud.source_id;
  out.capture_week = cloud.capture_week;
  out.points.reserve(indices.size());
  for (auto i : indices) out.points.push_back(cloud.points[i]);
  return out;
}

ColoredPointCloud remove_sky(const ColoredPointCloud& cloud, const SegmentationParams& params) {
  params.validate();
  return select(cloud, sky_step(cloud, all_indices(cloud), params));
}

ColoredPointCloud clip_depth(const ColoredPointCloud& cloud, const SegmentationParams& params) {
  params.validate();
  return select(cloud, depth_step(cloud, all_indices(cloud), params));
}

ColoredPointCloud remove_ground(const ColoredPointCloud& cloud, const SegmentationParams& params) {
  params.validate();
  return select(cloud, ground_step(cloud, all_indices(cloud), params));
}

ColoredPointCloud downsample(const ColoredPointCloud& cloud, const SegmentationParams& params) {
  params.validate();
  return select(cloud, stride_step(all_indices(cloud), params));
}

std::vector<std::size_t> segment_tree_indices(const ColoredPointCloud& cloud, const SegmentationParams& params) {
  params.validate();
  if (cloud.empty()) throw Error(ErrorKind::EmptyInput, "segment_tree on an empty cloud");
  auto idx = sky_step(cloud, all_indices(cloud), params);
  idx = depth_step(cloud, idx, params);
  idx = ground_step(cloud, idx, params);
  return stride_step(idx, params);
}

ColoredPointCloud segment_tree(const ColoredPointCloud& cloud, const SegmentationParams& params) {
  return select(cloud, segment_tree_indices(cloud, params));
}

}  // namespace canopy::treeseg
