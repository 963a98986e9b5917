#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "canopy/config.hpp"
#include "canopy/error.hpp"
#include "canopy/labelsvc.hpp"
#include "canopy/pcio.hpp"
#include "canopy/pipeline.hpp"
#include "canopy/yindex.hpp"
#include "labelsvc_http.hpp"

namespace {

using namespace canopy;
namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::string manifest;
  std::string method;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> workers;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Run configuration (JSON)");
  app->add_option("--manifest", c.manifest, "Season manifest (JSON)");
  app->add_option("--method", c.method, "Classification method")->check(CLI::IsMember({"kmeans", "gbm"}));
  app->add_option("--seed", c.seed, "Seed for k-means and generators");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (!c.method.empty()) cfg.method = parse_method(c.method);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.out_dir = c.out;
  if (c.workers) cfg.workers = *c.workers;
  cfg.validate();
  return cfg;
}

pcio::TreeManifest need_manifest(const Common& c) {
  if (c.manifest.empty()) throw Error(ErrorKind::Validation, "--manifest is required");
  return pcio::read_manifest(c.manifest);
}

int report(const pipeline::CommandResult& r) {
  for (const auto& p : r.outputs) std::cout << p.generic_string() << '\n';
  for (const auto& f : r.failures)
    std::cerr << "failed: " << f.tree_id << " week " << f.week << ": " << f.kind << ": " << f.message << '\n';
  return r.exit_code;
}

httplib::Server* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Canopy senescence toolkit"};
  app.require_subcommand(1);

  Common seg_opts, train_opts, index_opts, validate_opts, stats_opts, synth_opts, serve_opts;
  auto* seg = app.add_subcommand("segment", "Segment the foreground tree in every manifest cloud");
  add_common(seg, seg_opts);

  auto* train = app.add_subcommand("train", "Train a GBM classifier (or sweep a grid) on a label dataset");
  add_common(train, train_opts);
  std::string dataset;
  train->add_option("--dataset", dataset, "Label dataset CSV")->required();

  auto* index = app.add_subcommand("index", "Yellowness index per tree-week");
  add_common(index, index_opts);

  auto* validate = app.add_subcommand("validate", "Banded index vs ground truth, plus method timing");
  add_common(validate, validate_opts);

  auto* stats = app.add_subcommand("stats", "Per-week nitrogen-group statistics and map table");
  add_common(stats, stats_opts);
  std::string observations;
  stats->add_option("--observations", observations, "observations.csv from the index command")->required();

  auto* synth = app.add_subcommand("synth", "Generate a synthetic season");
  add_common(synth, synth_opts);
  pipeline::SynthOptions synth_cfg;
  synth->add_option("--trees", synth_cfg.trees, "Number of trees")->check(CLI::PositiveNumber);
  synth->add_option("--weeks", synth_cfg.weeks, "Number of weeks")->check(CLI::Range(2, 52));
  synth->add_option("--label-rows", synth_cfg.label_rows_per_class, "Labeled rows per class");

  auto* serve = app.add_subcommand("serve", "Run the labeling service");
  add_common(serve, serve_opts);
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string serve_dataset = "labels.csv";
  std::vector<std::string> cloud_files;
  std::size_t stride = labelsvc::kDefaultDisplayStride;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port")->check(CLI::Range(0, 65535));
  serve->add_option("--dataset", serve_dataset, "Label dataset to append to");
  serve->add_option("--cloud", cloud_files, "Extra PLY files to serve (id = file stem)");
  serve->add_option("--stride", stride, "Display stride")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pipeline::kExitValidation;
  }

  try {
    if (*seg) return report(pipeline::cmd_segment(resolve(seg_opts), need_manifest(seg_opts)));
    if (*train) return report(pipeline::cmd_train(resolve(train_opts), dataset));
    if (*index) return report(pipeline::cmd_index(resolve(index_opts), need_manifest(index_opts)));
    if (*validate) return report(pipeline::cmd_validate(resolve(validate_opts), need_manifest(validate_opts)));
    if (*stats) {
      const auto cfg = resolve(stats_opts);
      const auto obs = yindex::parse_observations(pcio::read_file(observations));
      return report(pipeline::cmd_stats(cfg, obs, need_manifest(stats_opts)));
    }
    if (*synth) return report(pipeline::cmd_synth(resolve(synth_opts), synth_cfg));
    if (*serve) {
      const auto cfg = resolve(serve_opts);
      labelsvc::LabelService service(serve_dataset, {stride, cfg.schema.neighbors});
      if (!serve_opts.manifest.empty()) {
        for (const auto& e : need_manifest(serve_opts).entries)
          for (const auto& [week, path] : e.clouds)
            service.register_cloud(e.tree_id + "_w" + std::to_string(week), pcio::read_cloud(path));
      }
      for (const auto& f : cloud_files) service.register_cloud(fs::path(f).stem().string(), pcio::read_cloud(f));
      httplib::Server server;
      labelsvc::attach_routes(server, service);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
      if (bound < 0) throw Error(ErrorKind::Io, "cannot bind " + host + ":" + std::to_string(port));
      std::cout << "listening on " << host << ':' << bound << std::endl;
      server.listen_after_bind();
      return pipeline::kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return pipeline::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pipeline::kExitValidation;
  }
  return pipeline::kExitOk;
}
