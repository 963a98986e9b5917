#include "canopy/labelsvc.hpp"

#include <algorithm>
#include <array>

#include <nlohmann/json.hpp>

#include "canopy/error.hpp"
#include "text_format.hpp"

namespace canopy::labelsvc {

using nlohmann::json;

LabelService::LabelService(std::filesystem::path dataset_path, ServiceOptions options)
    : dataset_path_(std::move(dataset_path)), options_(options) {
  if (options_.display_stride == 0) throw Error(ErrorKind::Validation, "display stride must be positive");
  if (options_.neighbors < 3) throw Error(ErrorKind::Validation, "neighbors must be at least 3");
  ids_path_ = dataset_path_;
  ids_path_ += ".submissions";
  if (std::filesystem::exists(dataset_path_)) dataset_ = pcio::read_label_dataset(dataset_path_);
  if (std::filesystem::exists(ids_path_)) {
    const auto text = pcio::read_file(ids_path_);
    detail::LineReader reader(text);
    std::string_view line;
    while (reader.next(line))
      if (!detail::trim(line).empty()) submission_ids_.emplace(detail::trim(line));
  }
}

void LabelService::register_cloud(const std::string& id, ColoredPointCloud cloud) {
  if (id.empty() || id.find('/') != std::string::npos)
    throw Error(ErrorKind::Validation, "cloud id must be nonempty and contain no '/'");
  auto entry = std::make_shared<Entry>();
  entry->cloud = std::move(cloud);
  if (entry->cloud.size() >= 4) entry->index = std::make_unique<features::NeighborIndex>(entry->cloud);
  std::unique_lock lock(clouds_mutex_);
  clouds_[id] = std::move(entry);
}

std::vector<CloudInfo> LabelService::list_clouds() const {
  std::shared_lock lock(clouds_mutex_);
  std::vector<CloudInfo> out;
  for (const auto& [id, e] : clouds_) out.push_back({id, e->cloud.size(), e->cloud.source_id, e->cloud.capture_week});
  return out;
}

CloudPayload LabelService::serve_cloud(const std::string& id) const {
  std::shared_ptr<Entry> entry;
  {
    std::shared_lock lock(clouds_mutex_);
    auto it = clouds_.find(id);
    if (it == clouds_.end()) throw Error(ErrorKind::NotFound, "unknown cloud '" + id + "'");
    entry = it->second;
  }
  CloudPayload p;
  p.id = id;
  p.point_count = entry->cloud.size();
  p.display_stride = options_.display_stride;
  for (std::size_t i = 0; i < entry->cloud.size(); i += p.display_stride) p.points.push_back(entry->cloud.points[i]);
  return p;
}

SubmitResult LabelService::submit(const LabelSubmission& submission) {
  std::shared_ptr<Entry> entry;
  {
    std::shared_lock lock(clouds_mutex_);
    auto it = clouds_.find(submission.cloud_id);
    if (it == clouds_.end()) throw Error(ErrorKind::NotFound, "unknown cloud '" + submission.cloud_id + "'");
    entry = it->second;
  }
  if (submission.labels.empty()) throw Error(ErrorKind::Validation, "submission has no labels");
  std::vector<std::size_t> seen;
  for (const auto& l : submission.labels) {
    if (l.point_index >= entry->cloud.size())
      throw Error(ErrorKind::Validation, "point index " + std::to_string(l.point_index) + " out of range");
    if (l.label == Label::Unassigned) throw Error(ErrorKind::Validation, "labels must be Green, Yellow or Trunk");
    seen.push_back(l.point_index);
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw Error(ErrorKind::Validation, "duplicate point index in submission");
  if (!entry->index) throw Error(ErrorKind::InsufficientPoints, "cloud too small for neighborhood features");

  std::lock_guard lock(dataset_mutex_);
  SubmitResult result;
  if (submission.submission_id && submission_ids_.count(*submission.submission_id)) {
    result.duplicate = true;
    result.dataset_rows = dataset_.rows.size();
    return result;
  }
  const int k = std::min<int>(options_.neighbors, static_cast<int>(entry->cloud.size()) - 1);
  for (const auto& l : submission.labels)
    result.rows.push_back(features::make_record(entry->cloud, *entry->index, l.point_index, l.label, k));

  auto next = dataset_;
  next.rows.insert(next.rows.end(), result.rows.begin(), result.rows.end());
  pcio::write_label_dataset(next, dataset_path_);
  dataset_ = std::move(next);
  if (submission.submission_id) {
    submission_ids_.insert(*submission.submission_id);
    std::string ids;
    for (const auto& id : submission_ids_) ids += id + '\n';
    pcio::write_file_atomic(ids_path_, ids);
  }
  result.appended = result.rows.size();
  result.dataset_rows = dataset_.rows.size();
  return result;
}

DatasetStats LabelService::stats() const {
  std::lock_guard lock(dataset_mutex_);
  DatasetStats s;
  s.rows = dataset_.rows.size();
  s.submissions = submission_ids_.size();
  for (const auto& r : dataset_.rows) {
    if (r.label == Label::Green) ++s.green;
    else if (r.label == Label::Yellow) ++s.yellow;
    else if (r.label == Label::Trunk) ++s.trunk;
  }
  return s;
}

json to_json(const CloudInfo& info) {
  return {{"schema_version", kSchemaVersion},
          {"id", info.id},
          {"point_count", info.point_count},
          {"source_id", info.source_id},
          {"capture_week", info.capture_week}};
}

json to_json(const CloudPayload& payload) {
  json positions = json::array();
  json colors = json::array();
  for (const auto& p : payload.points) {
    positions.push_back({p.x, p.y, p.z});
    colors.push_back({p.r, p.g, p.b});
  }
  return {{"schema_version", kSchemaVersion},
          {"id", payload.id},
          {"point_count", payload.point_count},
          {"display_stride", payload.display_stride},
          {"display_count", payload.points.size()},
          {"positions", std::move(positions)},
          {"colors", std::move(colors)}};
}

json record_to_json(const LabeledPointRecord& r) {
  const auto names = detail::split(pcio::kLabelDatasetHeader, ',');
  json j;
  j[std::string(names[0])] = std::string(to_string(r.label));
  j[std::string(names[1])] = r.a_star;
  j[std::string(names[2])] = r.b_star;
  j[std::string(names[3])] = r.r;
  j[std::string(names[4])] = r.g;
  j[std::string(names[5])] = r.b;
  for (std::size_t i = 0; i < 3; ++i) j[std::string(names[6 + i])] = r.eigenvalues[i];
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 3; ++c) j[std::string(names[9 + 3 * i + c])] = r.eigenvectors[i][c];
  return j;
}

json to_json(const SubmitResult& result) {
  json rows = json::array();
  for (const auto& r : result.rows) rows.push_back(record_to_json(r));
  return {{"schema_version", kSchemaVersion},
          {"appended", result.appended},
          {"duplicate", result.duplicate},
          {"dataset_rows", result.dataset_rows},
          {"rows", std::move(rows)}};
}

json to_json(const DatasetStats& s) {
  return {{"schema_version", kSchemaVersion},
          {"rows", s.rows},
          {"labels", {{"Green", s.green}, {"Yellow", s.yellow}, {"Trunk", s.trunk}}},
          {"submissions", s.submissions}};
}

LabelSubmission submission_from_json(const json& body) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::Validation, "submission: " + what); };
  if (!body.is_object()) fail("body must be an object");
  if (!body.contains("schema_version") || !body["schema_version"].is_number_integer() ||
      body["schema_version"].get<int>() != kSchemaVersion)
    fail("schema_version must be " + std::to_string(kSchemaVersion));
  if (!body.contains("cloud_id") || !body["cloud_id"].is_string()) fail("cloud_id is required");
  if (!body.contains("labels") || !body["labels"].is_array()) fail("labels must be an array");
  LabelSubmission s;
  s.cloud_id = body["cloud_id"].get<std::string>();
  s.annotator = body.value("annotator", std::string{});
  s.timestamp = body.value("timestamp", std::string{});
  if (body.contains("submission_id") && !body["submission_id"].is_null()) {
    if (!body["submission_id"].is_string()) fail("submission_id must be a string");
    s.submission_id = body["submission_id"].get<std::string>();
  }
  for (const auto& item : body["labels"]) {
    if (!item.is_object() || !item.contains("point_index") || !item["point_index"].is_number_unsigned() ||
        !item.contains("label") || !item["label"].is_string())
      fail("each label needs point_index (nonnegative integer) and label (string)");
    const auto label = parse_label(item["label"].get<std::string>());
    if (label == Label::Unassigned) fail("labels must be Green, Yellow or Trunk");
    s.labels.push_back({item["point_index"].get<std::size_t>(), label});
  }
  return s;
}

json to_json(const LabelSubmission& s) {
  json labels = json::array();
  for (const auto& l : s.labels) labels.push_back({{"point_index", l.point_index}, {"label", to_string(l.label)}});
  json j = {{"schema_version", kSchemaVersion},
            {"cloud_id", s.cloud_id},
            {"annotator", s.annotator},
            {"timestamp", s.timestamp},
            {"labels", std::move(labels)}};
  if (s.submission_id) j["submission_id"] = *s.submission_id;
  return j;
}

}  // namespace canopy::labelsvc
