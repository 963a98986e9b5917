#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "canopy/cloud.hpp"
#include "canopy/record.hpp"

namespace canopy::pcio {

/// Reads an ASCII or binary little-endian PLY file. The vertex element must
/// carry x, y, z and red, green, blue; other properties and elements are
/// skipped. Throws Error{Parse} on malformed headers (with line number),
/// Error{Format} on missing properties or bad values, Error{Io} otherwise.
ColoredPointCloud read_cloud(const std::filesystem::path& path);

/// Writes binary little-endian PLY (float xyz, uchar rgb). source_id and
/// capture_week travel in header comments so read_cloud restores them.
void write_cloud(const ColoredPointCloud& cloud, const std::filesystem::path& path);

struct ManifestEntry {
  std::string tree_id;
  int row = 0;
  int position_in_row = 0;
  /// week -> cloud file, resolved against the manifest directory on read.
  std::map<int, std::filesystem::path> clouds;
  std::optional<double> leaf_N_percent;
  std::optional<double> ground_truth_yellow_mass_g;
  std::optional<double> ground_truth_green_mass_g;
};

struct TreeManifest {
  std::string season;
  std::vector<ManifestEntry> entries;

  const ManifestEntry* find(std::string_view tree_id) const;
};

/// Checks tree_id uniqueness, N range (0,10) and ground-truth mass sanity.
void validate(const TreeManifest& manifest);

/// JSON document: {"season": "...", "trees": [ {tree_id, row, position_in_row,
/// clouds: {"<week>": path}, leaf_N_percent?, ground_truth_yellow_mass_g?,
/// ground_truth_green_mass_g?} ]}
TreeManifest read_manifest(const std::filesystem::path& path);
TreeManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir = {});
void write_manifest(const TreeManifest& manifest, const std::filesystem::path& path);

inline constexpr std::string_view kLabelDatasetHeader =
    "label,a_star,b_star,r,g,b,eig1,eig2,eig3,ev1x,ev1y,ev1z,ev2x,ev2y,ev2z,ev3x,ev3y,ev3z";

struct LabelDataset {
  std::vector<LabeledPointRecord> rows;
};

LabelDataset read_label_dataset(const std::filesystem::path& path);
LabelDataset parse_label_dataset(std::string_view text);
void write_label_dataset(const LabelDataset& dataset, const std::filesystem::path& path);
std::string format_label_dataset(const LabelDataset& dataset);
/// One CSV line (no newline) in header column order.
std::string format_label_row(const LabeledPointRecord& row);

/// Writes to a sibling temp file then renames over the destination.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace canopy::pcio
