#include <benchmark/benchmark.h>

#include "canopy/cluster.hpp"
#include "canopy/colorspace.hpp"
#include "canopy/gboost.hpp"
#include "canopy/synth.hpp"
#include "canopy/treeseg.hpp"

using namespace canopy;

namespace {

const ColoredPointCloud& tree_cloud() {
  static const ColoredPointCloud cloud = [] {
    synth::SynthTreeSpec spec;
    spec.point_count = 100000;
    spec.yellow_fraction = 0.5;
    spec.seed = 5;
    return synth::gen_tree(spec).cloud;
  }();
  return cloud;
}

const gboost::GbmModel& model() {
  static const gboost::GbmModel m = [] {
    synth::SynthTreeSpec spec;
    spec.yellow_fraction = 0.5;
    spec.trunk_fraction = 0.2;
    spec.seed = 102;
    return gboost::train(synth::gen_label_dataset(spec, 200), {}, {}).model;
  }();
  return m;
}

void BM_ClassifyKMeans(benchmark::State& state) {
  const auto& cloud = tree_cloud();
  for (auto _ : state) benchmark::DoNotOptimize(cluster::classify_kmeans(cloud, cluster::kDefaultClusters, {}, 0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cloud.size()));
}
BENCHMARK(BM_ClassifyKMeans)->Unit(benchmark::kMillisecond);

void BM_ClassifyGbm(benchmark::State& state) {
  const auto& cloud = tree_cloud();
  const auto& m = model();
  for (auto _ : state) benchmark::DoNotOptimize(gboost::classify_gbm(cloud, m));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cloud.size()));
}
BENCHMARK(BM_ClassifyGbm)->Unit(benchmark::kMillisecond);

void BM_SrgbToLab(benchmark::State& state) {
  const auto& cloud = tree_cloud();
  for (auto _ : state) {
    double acc = 0.0;
    for (const auto& p : cloud.points) acc += colorspace::srgb_to_lab(p).a_star;
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cloud.size()));
}
BENCHMARK(BM_SrgbToLab)->Unit(benchmark::kMillisecond);

void BM_SegmentTree(benchmark::State& state) {
  synth::SynthSceneSpec spec;
  spec.tree.seed = 3;
  const auto scene = synth::gen_scene(spec);
  for (auto _ : state) benchmark::DoNotOptimize(treeseg::segment_tree(scene.cloud, spec.filters));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(scene.cloud.size()));
}
BENCHMARK(BM_SegmentTree)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
