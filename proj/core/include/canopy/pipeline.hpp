#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "canopy/config.hpp"
#include "canopy/error.hpp"
#include "canopy/fieldstats.hpp"
#include "canopy/gboost.hpp"
#include "canopy/pcio.hpp"
#include "canopy/yindex.hpp"

namespace canopy::pipeline {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitPartial = 3;

/// Maps an error kind to the CLI exit code for a whole-command failure.
int exit_code_for(ErrorKind kind) noexcept;

struct Failure {
  std::string tree_id;
  int week = 0;
  std::string kind;
  std::string message;
};

inline constexpr const char* kFailureHeader = "tree_id,week,kind,message";
std::string format_failures(std::span<const Failure> failures);

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<Failure> failures;
  std::vector<std::filesystem::path> outputs;
};

/// Runs f(i) for i in [0, n) on up to `workers` threads. f must not throw.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& f) {
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) f(i);
  };
  const auto threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  std::vector<std::jthread> pool;
  for (std::size_t w = 1; w < threads; ++w) pool.emplace_back(run);
  run();
}

/// Labels a cloud with the configured method. Gbm needs a model.
ClassifiedCloud classify(const RunConfig& config, const ColoredPointCloud& cloud, const gboost::GbmModel* model);
ClassifiedCloud classify(const RunConfig& config, Method method, const ColoredPointCloud& cloud,
                         const gboost::GbmModel* model);

/// Loads config.model_path when the method needs it; Validation if unset.
std::optional<gboost::GbmModel> load_model_for(const RunConfig& config, Method method);

/// Writes <out>/segmented/<tree>_w<week>.ply, segment_summary.csv and failures.csv.
CommandResult cmd_segment(const RunConfig& config, const pcio::TreeManifest& manifest);

struct IndexRun {
  std::vector<yindex::TreeObservation> observations;
  std::vector<Failure> failures;
};

/// Classify + yellowness per tree-week in manifest order. Ground truth from
/// manifest masses is attached to each tree's final week.
IndexRun run_index(const RunConfig& config, const pcio::TreeManifest& manifest, const gboost::GbmModel* model);

/// Writes observations.csv and failures.csv.
CommandResult cmd_index(const RunConfig& config, const pcio::TreeManifest& manifest);

/// Single fit (model.json, train_report.json) or sweep (also sweep.csv,
/// sweep.json) when the config carries a grid. Writes the best model.
CommandResult cmd_train(const RunConfig& config, const std::filesystem::path& dataset_path);

struct MethodValidation {
  Method method = Method::KMeans;
  std::vector<yindex::ValidationPair> pairs;
  std::optional<yindex::ValidationReport> report;
};

struct TimingReport {
  std::size_t clouds = 0;
  int runs = 0;
  /// Median over runs of per-tree wall-clock seconds.
  double kmeans_median_s = 0.0;
  std::optional<double> gbm_median_s;
  std::optional<double> ratio;
};

struct ValidationRun {
  std::vector<MethodValidation> methods;
  std::vector<std::string> skipped;
  std::vector<Failure> failures;
  std::optional<TimingReport> timing;
};

/// Banded index of each tree's final-week cloud against its ground-truth
/// mass index, for k-means and, when a model is available, GBM. Trees
/// without ground truth are listed in `skipped`.
ValidationRun run_validate(const RunConfig& config, const pcio::TreeManifest& manifest, const gboost::GbmModel* model,
                           bool with_timing);

/// Writes validation.json, validation_pairs.csv, timing.json and failures.csv.
CommandResult cmd_validate(const RunConfig& config, const pcio::TreeManifest& manifest);

/// Writes stats.json (per-week sections) and map.csv.
CommandResult cmd_stats(const RunConfig& config, std::span<const yindex::TreeObservation> observations,
                        const pcio::TreeManifest& manifest);

struct SynthOptions {
  std::size_t trees = 25;
  int weeks = 6;
  std::size_t label_rows_per_class = 200;
};

/// Synthetic season under <out>: clouds, manifest.json, truth.csv, labels.csv
/// and a config.json set up for an exact end-to-end run.
CommandResult cmd_synth(const RunConfig& config, const SynthOptions& options);

}  // namespace canopy::pipeline
