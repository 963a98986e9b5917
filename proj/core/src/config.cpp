#include "canopy/config.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "canopy/error.hpp"
#include "canopy/pcio.hpp"

namespace canopy {

using nlohmann::json;

const char* to_string(Method m) noexcept { return m == Method::KMeans ? "kmeans" : "gbm"; }

Method parse_method(std::string_view text) {
  if (text == "kmeans") return Method::KMeans;
  if (text == "gbm") return Method::Gbm;
  throw Error(ErrorKind::Validation, "method must be 'kmeans' or 'gbm', got '" + std::string(text) + "'");
}

void RunConfig::validate() const {
  segmentation.validate();
  windows.validate();
  schema.validate();
  gbm.validate();
  if (clusters < 1) throw Error(ErrorKind::Validation, "clusters must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw Error(ErrorKind::Validation, "train_fraction must lie in (0, 1]");
  if (!(band_low_m < band_high_m)) throw Error(ErrorKind::Validation, "band low must be below band high");
  if (workers < 1) throw Error(ErrorKind::Validation, "workers must be >= 1");
  if (timing_runs < 5) throw Error(ErrorKind::Validation, "timing runs must be >= 5");
  if (sweep && (sweep->learning_rates.empty() || sweep->max_depths.empty() || sweep->n_estimators.empty()))
    throw Error(ErrorKind::Validation, "sweep grid axes must be nonempty");
}

namespace {

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw Error(ErrorKind::Validation, "config: '" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw Error(ErrorKind::Validation, "config: unknown key '" + key + "' in " + where);
}

HeightAxis parse_up(const std::string& s) {
  if (s == "x" || s == "+x") return {UpAxis::X, true};
  if (s == "-x") return {UpAxis::X, false};
  if (s == "y" || s == "+y") return {UpAxis::Y, true};
  if (s == "-y") return {UpAxis::Y, false};
  throw Error(ErrorKind::Validation, "config: up_axis must be one of x, -x, y, -y");
}

std::string up_name(HeightAxis up) {
  return std::string(up.positive ? "" : "-") + (up.axis == UpAxis::X ? "x" : "y");
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("config: ") + e.what());
  }
  RunConfig c;
  try {
    only_keys(doc, "config",
              {"segmentation", "index", "kmeans", "method", "features", "gbm", "model_path", "sweep", "train_fraction",
               "band", "out", "seed", "workers", "timing"});
    if (doc.contains("segmentation")) {
      const auto& s = doc["segmentation"];
      only_keys(s, "segmentation", {"sky_blue_threshold", "max_depth_m", "ground_band_m", "downsample_stride", "up_axis"});
      c.segmentation.sky_blue_threshold = s.value("sky_blue_threshold", c.segmentation.sky_blue_threshold);
      c.segmentation.max_depth_m = s.value("max_depth_m", c.segmentation.max_depth_m);
      c.segmentation.ground_band_m = s.value("ground_band_m", c.segmentation.ground_band_m);
      c.segmentation.downsample_stride = s.value("downsample_stride", c.segmentation.downsample_stride);
      if (s.contains("up_axis")) c.segmentation.up = parse_up(s["up_axis"].get<std::string>());
    }
    if (doc.contains("index")) {
      only_keys(doc["index"], "index", {"segment"});
      c.segment = doc["index"].value("segment", c.segment);
    }
    if (doc.contains("kmeans")) {
      const auto& k = doc["kmeans"];
      only_keys(k, "kmeans", {"clusters", "windows"});
      c.clusters = k.value("clusters", c.clusters);
      if (k.contains("windows")) c.windows = k["windows"].get<cluster::MergeWindows>();
    }
    if (doc.contains("method")) c.method = parse_method(doc["method"].get<std::string>());
    if (doc.contains("features")) c.schema = doc["features"].get<features::FeatureSchema>();
    if (doc.contains("gbm")) {
      only_keys(doc["gbm"], "gbm", {"learning_rate", "max_depth", "n_estimators", "seed"});
      c.gbm = doc["gbm"].get<gboost::GbmHyperparams>();
    }
    if (doc.contains("model_path") && !doc["model_path"].is_null()) {
      std::filesystem::path p = doc["model_path"].get<std::string>();
      c.model_path = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    if (doc.contains("sweep") && !doc["sweep"].is_null()) {
      const auto& s = doc["sweep"];
      if (s.is_string()) {
        if (s.get<std::string>() != "standard")
          throw Error(ErrorKind::Validation, "config: sweep must be \"standard\" or a grid object");
        c.sweep = SweepGrid{{0.1, 0.5, 1.0}, {1, 2, 3, 4, 5}, {100, 500, 1000}};
      } else {
        only_keys(s, "sweep", {"learning_rates", "max_depths", "n_estimators"});
        c.sweep = SweepGrid{s.at("learning_rates").get<std::vector<double>>(), s.at("max_depths").get<std::vector<int>>(),
                            s.at("n_estimators").get<std::vector<int>>()};
      }
    }
    c.train_fraction = doc.value("train_fraction", c.train_fraction);
    if (doc.contains("band")) {
      only_keys(doc["band"], "band", {"low_m", "high_m"});
      c.band_low_m = doc["band"].value("low_m", c.band_low_m);
      c.band_high_m = doc["band"].value("high_m", c.band_high_m);
    }
    if (doc.contains("out")) {
      std::filesystem::path p = doc["out"].get<std::string>();
      c.out_dir = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).lexically_normal();
    }
    c.seed = doc.value("seed", c.seed);
    c.workers = doc.value("workers", c.workers);
    if (doc.contains("timing")) {
      only_keys(doc["timing"], "timing", {"runs"});
      c.timing_runs = doc["timing"].value("runs", c.timing_runs);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Validation, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(pcio::read_file(path), path.parent_path());
}

json config_to_json(const RunConfig& c) {
  json j;
  j["segmentation"] = {{"sky_blue_threshold", c.segmentation.sky_blue_threshold},
                       {"max_depth_m", c.segmentation.max_depth_m},
                       {"ground_band_m", c.segmentation.ground_band_m},
                       {"downsample_stride", c.segmentation.downsample_stride},
                       {"up_axis", up_name(c.segmentation.up)}};
  j["index"] = {{"segment", c.segment}};
  j["kmeans"] = {{"clusters", c.clusters}, {"windows", c.windows}};
  j["method"] = to_string(c.method);
  j["features"] = c.schema;
  j["gbm"] = c.gbm;
  j["model_path"] = c.model_path ? json(c.model_path->generic_string()) : json(nullptr);
  if (c.sweep)
    j["sweep"] = {{"learning_rates", c.sweep->learning_rates},
                  {"max_depths", c.sweep->max_depths},
                  {"n_estimators", c.sweep->n_estimators}};
  else
    j["sweep"] = nullptr;
  j["train_fraction"] = c.train_fraction;
  j["band"] = {{"low_m", c.band_low_m}, {"high_m", c.band_high_m}};
  j["out"] = c.out_dir.generic_string();
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["timing"] = {{"runs", c.timing_runs}};
  return j;
}

}  // namespace canopy
