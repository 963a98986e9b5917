#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "canopy/cloud.hpp"
#include "canopy/features.hpp"
#include "canopy/pcio.hpp"

namespace canopy::labelsvc {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::size_t kDefaultDisplayStride = 5;

struct PointLabel {
  std::size_t point_index = 0;
  Label label = Label::Green;
};

struct LabelSubmission {
  std::string cloud_id;
  std::vector<PointLabel> labels;
  std::string annotator;
  std::string timestamp;
  /// Resubmitting an id already accepted appends nothing.
  std::optional<std::string> submission_id;
};

struct CloudInfo {
  std::string id;
  std::size_t point_count = 0;
  std::string source_id;
  int capture_week = 1;
};

/// Display subset: point i of `points` is full-cloud index i * display_stride.
struct CloudPayload {
  std::string id;
  std::size_t point_count = 0;
  std::size_t display_stride = kDefaultDisplayStride;
  std::vector<Point> points;

  std::size_t full_index(std::size_t display_index) const noexcept { return display_index * display_stride; }
};

struct SubmitResult {
  std::size_t appended = 0;
  bool duplicate = false;
  std::size_t dataset_rows = 0;
  std::vector<LabeledPointRecord> rows;
};

struct DatasetStats {
  std::size_t rows = 0;
  std::size_t green = 0;
  std::size_t yellow = 0;
  std::size_t trunk = 0;
  std::size_t submissions = 0;
};

struct ServiceOptions {
  std::size_t display_stride = kDefaultDisplayStride;
  int neighbors = features::kDefaultNeighbors;
};

/// Backs the labeling UI. Readers run concurrently; dataset appends are
/// serialized and each one rewrites the dataset file via write-then-rename,
/// so the file on disk is always a complete LabelDataset.
class LabelService {
 public:
  /// Loads the dataset at `dataset_path` when it exists.
  explicit LabelService(std::filesystem::path dataset_path, ServiceOptions options = {});

  void register_cloud(const std::string& id, ColoredPointCloud cloud);
  std::vector<CloudInfo> list_clouds() const;
  /// Throws NotFound for an unknown id.
  CloudPayload serve_cloud(const std::string& id) const;
  /// All-or-nothing: any invalid index, duplicate index or Unassigned label
  /// rejects the whole submission with Validation. Unknown cloud: NotFound.
  SubmitResult submit(const LabelSubmission& submission);
  DatasetStats stats() const;

  const std::filesystem::path& dataset_path() const noexcept { return dataset_path_; }

 private:
  struct Entry {
    ColoredPointCloud cloud;
    std::unique_ptr<features::NeighborIndex> index;
  };

  std::filesystem::path dataset_path_;
  std::filesystem::path ids_path_;
  ServiceOptions options_;

  mutable std::shared_mutex clouds_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> clouds_;

  mutable std::mutex dataset_mutex_;
  pcio::LabelDataset dataset_;
  std::set<std::string> submission_ids_;
};

nlohmann::json to_json(const CloudInfo& info);
nlohmann::json to_json(const CloudPayload& payload);
nlohmann::json to_json(const SubmitResult& result);
nlohmann::json to_json(const DatasetStats& stats);
/// Record keyed by the label dataset column names.
nlohmann::json record_to_json(const LabeledPointRecord& record);
/// Throws Validation on a missing field, wrong schema_version or bad label.
LabelSubmission submission_from_json(const nlohmann::json& body);
nlohmann::json to_json(const LabelSubmission& submission);

}  // namespace canopy::labelsvc
