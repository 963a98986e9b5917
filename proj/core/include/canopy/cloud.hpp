#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace canopy {

/// One camera-frame sample. z is the depth axis.
struct Point {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct ColoredPointCloud {
  std::vector<Point> points;
  std::string source_id;
  int capture_week = 1;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  friend bool operator==(const ColoredPointCloud&, const ColoredPointCloud&) = default;
};

enum class Label : std::uint8_t { Green = 0, Yellow = 1, Trunk = 2, Unassigned = 3 };

std::string_view to_string(Label label) noexcept;
/// Accepts the three labeling classes plus "Unassigned"; throws Validation otherwise.
Label parse_label(std::string_view text);

struct ClassifiedCloud {
  ColoredPointCloud cloud;
  std::vector<Label> labels;
};

/// Height axis of the camera frame.
enum class UpAxis : std::uint8_t { X, Y };

struct HeightAxis {
  UpAxis axis = UpAxis::X;
  bool positive = true;

  float height(const Point& p) const noexcept {
    const float v = axis == UpAxis::X ? p.x : p.y;
    return positive ? v : -v;
  }

  friend bool operator==(const HeightAxis&, const HeightAxis&) = default;
};

}  // namespace canopy
