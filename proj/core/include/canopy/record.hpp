#pragma once

#include <array>

#include "canopy/cloud.hpp"

namespace canopy {

/// One human-labeled point: colorimetric values plus the eigen-structure of
/// its spatial neighborhood. This is the training row for the classifier.
struct LabeledPointRecord {
  Label label = Label::Green;
  double a_star = 0.0;
  double b_star = 0.0;
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  /// Sorted descending, nonnegative.
  std::array<double, 3> eigenvalues{};
  /// eigenvectors[i] pairs with eigenvalues[i]; unit norm.
  std::array<std::array<double, 3>, 3> eigenvectors{};

  friend bool operator==(const LabeledPointRecord&, const LabeledPointRecord&) = default;
};

}  // namespace canopy
