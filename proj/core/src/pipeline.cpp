#include "canopy/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "canopy/cluster.hpp"
#include "canopy/error.hpp"
#include "canopy/synth.hpp"
#include "canopy/treeseg.hpp"
#include "text_format.hpp"

namespace canopy::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(ErrorKind) noexcept { return kExitValidation; }

namespace {

std::string csv_safe(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = c == ',' ? ';' : ' ';
  return s;
}

struct Job {
  std::size_t entry = 0;
  int week = 0;
  fs::path path;
};

std::vector<Job> cloud_jobs(const pcio::TreeManifest& manifest) {
  std::vector<Job> jobs;
  for (std::size_t e = 0; e < manifest.entries.size(); ++e)
    for (const auto& [week, path] : manifest.entries[e].clouds) jobs.push_back({e, week, path});
  return jobs;
}

Failure failure_from(const std::string& tree, int week, const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  return {tree, week, err ? std::string(to_string(err->kind())) : "Internal", e.what()};
}

void finish(CommandResult& result, const fs::path& out_dir) {
  const auto path = out_dir / "failures.csv";
  pcio::write_file_atomic(path, format_failures(result.failures));
  result.outputs.push_back(path);
  if (!result.failures.empty()) result.exit_code = kExitPartial;
}

ColoredPointCloud prepare(const RunConfig& config, const ColoredPointCloud& cloud) {
  return config.segment ? treeseg::segment_tree(cloud, config.segmentation) : cloud;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string format_failures(std::span<const Failure> failures) {
  std::string out = kFailureHeader;
  out += '\n';
  for (const auto& f : failures)
    out += csv_safe(f.tree_id) + ',' + std::to_string(f.week) + ',' + f.kind + ',' + csv_safe(f.message) + '\n';
  return out;
}

ClassifiedCloud classify(const RunConfig& config, Method method, const ColoredPointCloud& cloud,
                         const gboost::GbmModel* model) {
  if (method == Method::KMeans) return cluster::classify_kmeans(cloud, config.clusters, config.windows, config.seed);
  if (!model) throw Error(ErrorKind::Validation, "method gbm needs a trained model (model_path)");
  return gboost::classify_gbm(cloud, *model);
}

ClassifiedCloud classify(const RunConfig& config, const ColoredPointCloud& cloud, const gboost::GbmModel* model) {
  return classify(config, config.method, cloud, model);
}

std::optional<gboost::GbmModel> load_model_for(const RunConfig& config, Method method) {
  if (method != Method::Gbm) return std::nullopt;
  if (!config.model_path) throw Error(ErrorKind::Validation, "method gbm needs model_path in the config");
  return gboost::GbmModel::load(*config.model_path);
}

CommandResult cmd_segment(const RunConfig& config, const pcio::TreeManifest& manifest) {
  config.validate();
  const auto jobs = cloud_jobs(manifest);
  const auto dir = config.out_dir / "segmented";
  fs::create_directories(dir);
  struct Outcome {
    std::size_t in = 0, out = 0;
    std::optional<Failure> failure;
  };
  std::vector<Outcome> outcomes(jobs.size());
  parallel_for(jobs.size(), config.workers, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto& tree = manifest.entries[job.entry].tree_id;
    try {
      const auto cloud = pcio::read_cloud(job.path);
      auto seg = treeseg::segment_tree(cloud, config.segmentation);
      seg.source_id = tree;
      seg.capture_week = job.week;
      pcio::write_cloud(seg, dir / (tree + "_w" + std::to_string(job.week) + ".ply"));
      outcomes[i].in = cloud.size();
      outcomes[i].out = seg.size();
    } catch (const std::exception& e) {
      outcomes[i].failure = failure_from(tree, job.week, e);
    }
  });
  CommandResult result;
  std::string summary = "tree_id,week,input_points,output_points,status\n";
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& tree = manifest.entries[jobs[i].entry].tree_id;
    summary += tree + ',' + std::to_string(jobs[i].week) + ',' + std::to_string(outcomes[i].in) + ',' +
               std::to_string(outcomes[i].out) + ',' + (outcomes[i].failure ? "failed" : "ok") + '\n';
    if (outcomes[i].failure) result.failures.push_back(*outcomes[i].failure);
    else result.outputs.push_back(dir / (tree + "_w" + std::to_string(jobs[i].week) + ".ply"));
  }
  pcio::write_file_atomic(config.out_dir / "segment_summary.csv", summary);
  result.outputs.push_back(config.out_dir / "segment_summary.csv");
  finish(result, config.out_dir);
  return result;
}

IndexRun run_index(const RunConfig& config, const pcio::TreeManifest& manifest, const gboost::GbmModel* model) {
  config.validate();
  const auto jobs = cloud_jobs(manifest);
  struct Outcome {
    std::optional<yindex::YellownessIndex> index;
    std::optional<Failure> failure;
  };
  std::vector<Outcome> outcomes(jobs.size());
  parallel_for(jobs.size(), config.workers, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto& tree = manifest.entries[job.entry].tree_id;
    try {
      const auto cloud = prepare(config, pcio::read_cloud(job.path));
      outcomes[i].index = yindex::yellowness(classify(config, cloud, model));
    } catch (const std::exception& e) {
      outcomes[i].failure = failure_from(tree, job.week, e);
    }
  });
  IndexRun run;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (outcomes[i].failure) {
      run.failures.push_back(*outcomes[i].failure);
      continue;
    }
    const auto& entry = manifest.entries[jobs[i].entry];
    yindex::TreeObservation o;
    o.tree_id = entry.tree_id;
    o.week = jobs[i].week;
    o.index = *outcomes[i].index;
    o.leaf_N_percent = entry.leaf_N_percent;
    const bool last_week = jobs[i].week == entry.clouds.rbegin()->first;
    if (last_week && entry.ground_truth_yellow_mass_g && entry.ground_truth_green_mass_g) {
      try {
        o.ground_truth_index =
            yindex::ground_truth_index(*entry.ground_truth_yellow_mass_g, *entry.ground_truth_green_mass_g);
      } catch (const Error&) {
      }
    }
    run.observations.push_back(std::move(o));
  }
  return run;
}

CommandResult cmd_index(const RunConfig& config, const pcio::TreeManifest& manifest) {
  config.validate();
  const auto model = load_model_for(config, config.method);
  auto run = run_index(config, manifest, model ? &*model : nullptr);
  fs::create_directories(config.out_dir);
  CommandResult result;
  result.failures = std::move(run.failures);
  const auto path = config.out_dir / "observations.csv";
  pcio::write_file_atomic(path, yindex::format_observations(run.observations));
  result.outputs.push_back(path);
  finish(result, config.out_dir);
  return result;
}

CommandResult cmd_train(const RunConfig& config, const fs::path& dataset_path) {
  config.validate();
  const auto dataset = pcio::read_label_dataset(dataset_path);
  fs::create_directories(config.out_dir);
  CommandResult result;
  const auto model_path = config.out_dir / "model.json";
  if (config.sweep) {
    const auto grid = gboost::make_grid(config.sweep->learning_rates, config.sweep->max_depths,
                                        config.sweep->n_estimators, config.gbm.seed);
    const auto report = gboost::sweep(dataset, config.schema, grid, config.train_fraction);
    pcio::write_file_atomic(config.out_dir / "sweep.csv", gboost::format_sweep_csv(report));
    pcio::write_file_atomic(config.out_dir / "sweep.json", gboost::sweep_to_json(report).dump(2) + "\n");
    result.outputs.push_back(config.out_dir / "sweep.csv");
    result.outputs.push_back(config.out_dir / "sweep.json");
    for (const auto& row : report.rows) {
      if (row.error.empty()) continue;
      result.failures.push_back({"lr=" + detail::format_double(row.hp.learning_rate) +
                                     " depth=" + std::to_string(row.hp.max_depth) +
                                     " n=" + std::to_string(row.hp.n_estimators),
                                 0, "Sweep", row.error});
    }
    if (!report.best) throw Error(ErrorKind::Validation, "every sweep cell failed");
    const auto best = gboost::train(dataset, config.schema, report.rows[*report.best].hp, config.train_fraction);
    best.model.save(model_path);
  } else {
    const auto trained = gboost::train(dataset, config.schema, config.gbm, config.train_fraction);
    trained.model.save(model_path);
    json rep = {{"hyperparams", config.gbm},
                {"train_accuracy", trained.train_accuracy},
                {"test_accuracy", trained.test_rows ? json(trained.test_accuracy) : json(nullptr)},
                {"train_rows", trained.train_rows},
                {"test_rows", trained.test_rows},
                {"deviance_history", trained.deviance_history}};
    pcio::write_file_atomic(config.out_dir / "train_report.json", rep.dump(2) + "\n");
    result.outputs.push_back(config.out_dir / "train_report.json");
  }
  result.outputs.push_back(model_path);
  finish(result, config.out_dir);
  return result;
}

ValidationRun run_validate(const RunConfig& config, const pcio::TreeManifest& manifest, const gboost::GbmModel* model,
                           bool with_timing) {
  config.validate();
  ValidationRun run;
  struct Item {
    std::string tree_id;
    int week = 0;
    fs::path path;
    double truth = 0.0;
  };
  std::vector<Item> items;
  for (const auto& e : manifest.entries) {
    if (!e.ground_truth_yellow_mass_g || !e.ground_truth_green_mass_g || e.clouds.empty()) {
      run.skipped.push_back(e.tree_id);
      continue;
    }
    try {
      const auto truth = yindex::ground_truth_index(*e.ground_truth_yellow_mass_g, *e.ground_truth_green_mass_g);
      items.push_back({e.tree_id, e.clouds.rbegin()->first, e.clouds.rbegin()->second, truth});
    } catch (const Error&) {
      run.skipped.push_back(e.tree_id);
    }
  }

  std::vector<Method> methods{Method::KMeans};
  if (model) methods.push_back(Method::Gbm);

  std::vector<std::optional<ColoredPointCloud>> clouds(items.size());
  std::vector<std::vector<std::optional<double>>> estimates(items.size(),
                                                            std::vector<std::optional<double>>(methods.size()));
  std::vector<std::optional<Failure>> failures(items.size());
  parallel_for(items.size(), config.workers, [&](std::size_t i) {
    try {
      auto cloud = prepare(config, pcio::read_cloud(items[i].path));
      for (std::size_t m = 0; m < methods.size(); ++m) {
        const auto classified = classify(config, methods[m], cloud, model);
        std::size_t y = 0, g = 0;
        for (std::size_t p = 0; p < cloud.size(); ++p) {
          const double h = config.segmentation.up.height(cloud.points[p]);
          if (h < config.band_low_m || h >= config.band_high_m) continue;
          if (classified.labels[p] == Label::Yellow) ++y;
          else if (classified.labels[p] == Label::Green) ++g;
        }
        estimates[i][m] = yindex::from_counts(y, g).value;
      }
      clouds[i] = std::move(cloud);
    } catch (const std::exception& e) {
      failures[i] = failure_from(items[i].tree_id, items[i].week, e);
    }
  });

  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodValidation mv;
    mv.method = methods[m];
    for (std::size_t i = 0; i < items.size(); ++i)
      if (estimates[i][m]) mv.pairs.push_back({items[i].tree_id, *estimates[i][m], items[i].truth});
    try {
      mv.report = yindex::validate(mv.pairs);
    } catch (const Error& e) {
      run.failures.push_back({"*", 0, std::string(to_string(e.kind())), std::string(to_string(mv.method)) + ": " + e.what()});
    }
    run.methods.push_back(std::move(mv));
  }
  for (auto& f : failures)
    if (f) run.failures.push_back(*f);

  if (with_timing) {
    std::vector<const ColoredPointCloud*> timed;
    for (const auto& c : clouds)
      if (c) timed.push_back(&*c);
    if (!timed.empty()) {
      TimingReport t;
      t.clouds = timed.size();
      t.runs = config.timing_runs;
      auto time_method = [&](Method method) {
        auto pass = [&] {
          const auto start = std::chrono::steady_clock::now();
          for (const auto* c : timed) {
            const auto labels = classify(config, method, *c, model);
            (void)labels;
          }
          const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
          return d.count() / static_cast<double>(timed.size());
        };
        pass();  // warmup
        std::vector<double> samples;
        for (int r = 0; r < config.timing_runs; ++r) samples.push_back(pass());
        return median(samples);
      };
      try {
        t.kmeans_median_s = time_method(Method::KMeans);
        if (model) {
          t.gbm_median_s = time_method(Method::Gbm);
          if (*t.gbm_median_s > 0.0) t.ratio = t.kmeans_median_s / *t.gbm_median_s;
        }
        run.timing = t;
      } catch (const std::exception& e) {
        run.failures.push_back(failure_from("*", 0, e));
      }
    }
  }
  return run;
}

CommandResult cmd_validate(const RunConfig& config, const pcio::TreeManifest& manifest) {
  config.validate();
  std::optional<gboost::GbmModel> model;
  if (config.model_path) model = gboost::GbmModel::load(*config.model_path);
  else if (config.method == Method::Gbm) throw Error(ErrorKind::Validation, "method gbm needs model_path in the config");
  const auto run = run_validate(config, manifest, model ? &*model : nullptr, true);
  fs::create_directories(config.out_dir);
  CommandResult result;
  result.failures = run.failures;

  json doc;
  doc["band"] = {{"low_m", config.band_low_m}, {"high_m", config.band_high_m}};
  doc["skipped"] = run.skipped;
  doc["methods"] = json::object();
  std::string pairs_csv = "tree_id,method,estimate,truth,residual\n";
  for (const auto& mv : run.methods) {
    json m;
    m["pairs"] = mv.pairs.size();
    if (mv.report) {
      m["r_squared"] = mv.report->r_squared;
      m["r_squared_identity"] = mv.report->r_squared_identity;
      m["slope"] = mv.report->slope;
      m["intercept"] = mv.report->intercept;
    } else {
      m["r_squared"] = nullptr;
    }
    doc["methods"][to_string(mv.method)] = m;
    for (const auto& p : mv.pairs)
      pairs_csv += p.tree_id + ',' + to_string(mv.method) + ',' + detail::format_double(p.estimate) + ',' +
                   detail::format_double(p.truth) + ',' + detail::format_double(p.truth - p.estimate) + '\n';
  }
  pcio::write_file_atomic(config.out_dir / "validation.json", doc.dump(2) + "\n");
  pcio::write_file_atomic(config.out_dir / "validation_pairs.csv", pairs_csv);
  result.outputs.push_back(config.out_dir / "validation.json");
  result.outputs.push_back(config.out_dir / "validation_pairs.csv");

  json timing = nullptr;
  if (run.timing) {
    const auto& t = *run.timing;
    timing = {{"clouds", t.clouds},
              {"runs", t.runs},
              {"warmup_excluded", true},
              {"kmeans_median_s_per_tree", t.kmeans_median_s},
              {"gbm_median_s_per_tree", t.gbm_median_s ? json(*t.gbm_median_s) : json(nullptr)},
              {"ratio_kmeans_over_gbm", t.ratio ? json(*t.ratio) : json(nullptr)}};
  }
  pcio::write_file_atomic(config.out_dir / "timing.json", timing.dump(2) + "\n");
  result.outputs.push_back(config.out_dir / "timing.json");
  finish(result, config.out_dir);
  return result;
}

CommandResult cmd_stats(const RunConfig& config, std::span<const yindex::TreeObservation> observations,
                        const pcio::TreeManifest& manifest) {
  config.validate();
  const auto report = fieldstats::weekly_report(observations, manifest);
  fs::create_directories(config.out_dir);
  CommandResult result;
  pcio::write_file_atomic(config.out_dir / "stats.json", fieldstats::report_to_json(report).dump(2) + "\n");
  pcio::write_file_atomic(config.out_dir / "map.csv", fieldstats::format_map_csv(report));
  result.outputs.push_back(config.out_dir / "stats.json");
  result.outputs.push_back(config.out_dir / "map.csv");
  for (const auto& w : report.warnings) result.failures.push_back({"*", 0, "Warning", w});
  finish(result, config.out_dir);
  return result;
}

CommandResult cmd_synth(const RunConfig& config, const SynthOptions& options) {
  auto spec = synth::default_season(options.trees, options.weeks, config.seed);
  spec.scene.filters.sky_blue_threshold = config.segmentation.sky_blue_threshold;
  spec.scene.filters.max_depth_m = config.segmentation.max_depth_m;
  spec.scene.filters.ground_band_m = config.segmentation.ground_band_m;
  spec.scene.filters.up = config.segmentation.up;
  spec.scene.tree.up = config.segmentation.up;
  const auto season = synth::gen_season(spec);
  synth::write_season(season, config.out_dir);

  synth::SynthTreeSpec label_tree = spec.scene.tree;
  label_tree.point_count = 20000;
  label_tree.yellow_fraction = 0.5;
  label_tree.trunk_fraction = 0.2;
  label_tree.seed = config.seed ^ 0x6c6162656c73ULL;
  const auto dataset = synth::gen_label_dataset(label_tree, options.label_rows_per_class, config.schema.neighbors);
  pcio::write_label_dataset(dataset, config.out_dir / "labels.csv");

  // Every tree point survives segmentation at stride 1, so the pipeline's
  // counts can be compared with the generator's exactly.
  const auto& wires = spec.scene.tree.wire_heights;
  json cfg = {{"segmentation",
               {{"sky_blue_threshold", spec.scene.filters.sky_blue_threshold},
                {"max_depth_m", spec.scene.filters.max_depth_m},
                {"ground_band_m", spec.scene.filters.ground_band_m},
                {"downsample_stride", 1}}},
              {"band",
               {{"low_m", spec.scene.tree.base_height_m + wires[0]}, {"high_m", spec.scene.tree.base_height_m + wires[1]}}},
              {"model_path", "model.json"},
              {"out", "."},
              {"seed", config.seed}};
  cfg["segmentation"]["up_axis"] = config_to_json(config)["segmentation"]["up_axis"];
  pcio::write_file_atomic(config.out_dir / "config.json", cfg.dump(2) + "\n");

  CommandResult result;
  for (const char* name : {"manifest.json", "truth.csv", "labels.csv", "config.json"})
    result.outputs.push_back(config.out_dir / name);
  finish(result, config.out_dir);
  return result;
}

}  // namespace canopy::pipeline
