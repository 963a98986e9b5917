#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "canopy/cloud.hpp"

namespace canopy::colorspace {

/// CIE-L*a*b* relative to the D65 white, 2-degree observer.
struct LabColor {
  double L = 0.0;
  double a_star = 0.0;
  double b_star = 0.0;
};

/// Hexcone HSV. Hue of achromatic colors is 0.
struct HsvColor {
  double h = 0.0;
  double s = 0.0;
  double v = 0.0;
};

/// D65 reference white in XYZ, Y normalized to 100.
inline constexpr double kWhiteX = 95.047;
inline constexpr double kWhiteY = 100.0;
inline constexpr double kWhiteZ = 108.883;

LabColor srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);
HsvColor srgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);
/// Real-valued variant; channels on the same 0-255 scale.
HsvColor rgb_to_hsv(double r, double g, double b);

inline LabColor srgb_to_lab(const Point& p) { return srgb_to_lab(p.r, p.g, p.b); }

enum class Channel { Hue, AStar, BStar };

std::string_view to_string(Channel channel) noexcept;
Channel parse_channel(std::string_view text);

struct DistributionSummary {
  Channel channel = Channel::Hue;
  /// bins + 1 ascending edges.
  std::vector<double> bin_edges;
  /// sum(density * width) == 1.
  std::vector<double> densities;
  std::size_t samples = 0;

  /// Center of the densest bin.
  double mode() const;
};

/// Fixed-width histogram over the channel's nominal range: hue [0, 360),
/// a* and b* [-128, 128]. Values outside the range land in the edge bins.
DistributionSummary summarize_channel(const ColoredPointCloud& cloud, Channel channel, int bins);

}  // namespace canopy::colorspace
