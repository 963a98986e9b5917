#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "canopy/cloud.hpp"
#include "canopy/record.hpp"

namespace canopy::features {

inline constexpr int kDefaultNeighbors = 30;

struct NeighborhoodEigen {
  /// Descending, nonnegative.
  std::array<double, 3> eigenvalues{};
  /// Unit vectors; eigenvectors[i] pairs with eigenvalues[i].
  std::array<std::array<double, 3>, 3> eigenvectors{};
};

/// Static kd-tree over the xyz coordinates of a cloud. Built once and
/// queried read-only, so a single index can be shared across threads.
class NeighborIndex {
 public:
  explicit NeighborIndex(const ColoredPointCloud& cloud);
  ~NeighborIndex();
  NeighborIndex(NeighborIndex&&) noexcept;
  NeighborIndex& operator=(NeighborIndex&&) noexcept;

  std::size_t size() const noexcept;

  /// The k nearest points to point `index`, excluding itself, ordered by
  /// (distance, index). Equal distances resolve to the lower index.
  std::vector<std::size_t> nearest(std::size_t index, int k) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Eigen-decomposition of the population covariance (1/k) of the k nearest
/// neighbors of a point. Throws InsufficientPoints when the cloud has fewer
/// than k + 1 points, Validation when k < 3.
NeighborhoodEigen neighborhood_eigen(const ColoredPointCloud& cloud, std::size_t point_index, int k);
NeighborhoodEigen neighborhood_eigen(const ColoredPointCloud& cloud, const NeighborIndex& index,
                                     std::size_t point_index, int k);

/// Eigen-decomposition of the population covariance of an explicit point set.
NeighborhoodEigen covariance_eigen(std::span<const std::array<double, 3>> points);

enum class FeatureChannel { AStar, BStar, R, G, B, Eigen };

/// Ordered list of channels making up a feature vector. Eigen expands to 12
/// columns (3 eigenvalues followed by 3 eigenvectors).
struct FeatureSchema {
  std::vector<FeatureChannel> channels{FeatureChannel::AStar, FeatureChannel::BStar, FeatureChannel::R,
                                       FeatureChannel::G, FeatureChannel::B};
  int neighbors = kDefaultNeighbors;

  static FeatureSchema color_only();
  static FeatureSchema with_eigen(int neighbors = kDefaultNeighbors);

  std::size_t arity() const;
  bool uses_eigen() const;
  std::vector<std::string> column_names() const;
  void validate() const;

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

void to_json(nlohmann::json& j, const FeatureSchema& schema);
void from_json(const nlohmann::json& j, FeatureSchema& schema);

/// Row-major matrix of feature vectors, one row per point or record.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// One feature vector per point, in point order.
FeatureMatrix featurize(const ColoredPointCloud& cloud, const FeatureSchema& schema);

/// Feature vector of a stored record under a schema.
std::vector<double> feature_row(const LabeledPointRecord& record, const FeatureSchema& schema);
FeatureMatrix feature_matrix(std::span<const LabeledPointRecord> records, const FeatureSchema& schema);

/// Builds the full labeled record (color + eigen columns) for one point.
LabeledPointRecord make_record(const ColoredPointCloud& cloud, const NeighborIndex& index,
                               std::size_t point_index, Label label, int k);

}  // namespace canopy::features
