#include "canopy/colorspace.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "canopy/error.hpp"

namespace canopy::colorspace {

namespace {

double srgb_decode(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

const std::array<double, 256>& linear_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) t[static_cast<std::size_t>(i)] = srgb_decode(i / 255.0);
    return t;
  }();
  return table;
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  constexpr double delta3 = delta * delta * delta;
  return t > delta3 ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace

LabColor srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const auto& lin = linear_table();
  const double rl = lin[r] * 100.0;
  const double gl = lin[g] * 100.0;
  const double bl = lin[b] * 100.0;

  // sRGB primaries, D65 white (IEC 61966-2-1)
  const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;

  const double fx = lab_f(x / kWhiteX);
  const double fy = lab_f(y / kWhiteY);
  const double fz = lab_f(z / kWhiteZ);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

HsvColor rgb_to_hsv(double r, double g, double b) {
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  HsvColor out;
  out.v = mx / 255.0;
  out.s = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) return out;

  double h;
  if (mx == r) {
    h = (g - b) / delta;
  } else if (mx == g) {
    h = 2.0 + (b - r) / delta;
  } else {
    h = 4.0 + (r - g) / delta;
  }
  h *= 60.0;
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h -= 360.0;
  out.h = h;
  return out;
}

HsvColor srgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return rgb_to_hsv(r, g, b);
}

std::string_view to_string(Channel channel) noexcept {
  switch (channel) {
    case Channel::Hue: return "hue";
    case Channel::AStar: return "a_star";
    case Channel::BStar: return "b_star";
  }
  return "hue";
}

Channel parse_channel(std::string_view text) {
  if (text == "hue") return Channel::Hue;
  if (text == "a_star" || text == "a*") return Channel::AStar;
  if (text == "b_star" || text == "b*") return Channel::BStar;
  throw Error(ErrorKind::Validation, "unknown channel '" + std::string(text) + "'");
}

double DistributionSummary::mode() const {
  if (densities.empty()) return 0.0;
  const auto i = static_cast<std::size_t>(std::max_element(densities.begin(), densities.end()) - densities.begin());
  return 0.5 * (bin_edges[i] + bin_edges[i + 1]);
}

DistributionSummary summarize_channel(const ColoredPointCloud& cloud, Channel channel, int bins) {
  if (bins < 2) throw Error(ErrorKind::Validation, "summarize_channel needs at least 2 bins");
  if (cloud.empty()) throw Error(ErrorKind::EmptyInput, "summarize_channel on an empty cloud");

  const double lo = channel == Channel::Hue ? 0.0 : -128.0;
  const double hi = channel == Channel::Hue ? 360.0 : 128.0;
  const double width = (hi - lo) / bins;

  DistributionSummary out;
  out.channel = channel;
  out.samples = cloud.size();
  out.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) out.bin_edges[static_cast<std::size_t>(i)] = lo + width * i;
  out.bin_edges.back() = hi;

  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  for (const auto& p : cloud.points) {
    double v;
    switch (channel) {
      case Channel::Hue: v = srgb_to_hsv(p.r, p.g, p.b).h; break;
      case Channel::AStar: v = srgb_to_lab(p).a_star; break;
      case Channel::BStar: v = srgb_to_lab(p).b_star; break;
    }
    auto idx = static_cast<long long>(std::floor((v - lo) / width));
    idx = std::clamp<long long>(idx, 0, bins - 1);
    ++counts[static_cast<std::size_t>(idx)];
  }
  out.densities.resize(counts.size());
  const double n = static_cast<double>(cloud.size());
  for (std::size_t i = 0; i < counts.size(); ++i) out.densities[i] = static_cast<double>(counts[i]) / (n * width);
  return out;
}

}  // namespace canopy::colorspace
