#include "canopy/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "canopy/error.hpp"
#include "canopy/features.hpp"
#include "canopy/yindex.hpp"
#include "random.hpp"
#include "text_format.hpp"

namespace canopy::synth {

namespace {

using detail::Rng;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::Validation, "synth: " + what);
}

bool unit_fraction(double f) { return f >= 0.0 && f <= 1.0; }

Point place(double height, double lateral, double depth, HeightAxis up) {
  Point p;
  const auto h = static_cast<float>(up.positive ? height : -height);
  const auto l = static_cast<float>(lateral);
  if (up.axis == UpAxis::X) {
    p.x = h;
    p.y = l;
  } else {
    p.y = h;
    p.x = l;
  }
  p.z = static_cast<float>(depth);
  return p;
}

std::uint8_t noisy_channel(std::uint8_t base, double sigma, Rng& rng) {
  const double v = std::round(base + sigma * detail::standard_normal(rng));
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

void paint(Point& p, const Rgb& base, double sigma, Rng& rng) {
  p.r = noisy_channel(base[0], sigma, rng);
  p.g = noisy_channel(base[1], sigma, rng);
  p.b = noisy_channel(base[2], sigma, rng);
}

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * detail::uniform_unit(rng); }

}  // namespace

void SynthTreeSpec::validate() const {
  require(height_m > 0.0 && std::isfinite(height_m), "height must be positive");
  require(trunk_height_m >= 0.0 && trunk_height_m < height_m, "trunk height must lie in [0, height)");
  require(crown_width_m > 0.0 && crown_depth_m > 0.0, "crown size must be positive");
  require(depth_m - 0.5 * crown_depth_m > 0.0, "tree must lie in front of the camera");
  require(point_count > 0, "point_count must be positive");
  require(unit_fraction(yellow_fraction), "yellow_fraction must lie in [0, 1]");
  require(unit_fraction(trunk_fraction), "trunk_fraction must lie in [0, 1]");
  require(color_sigma >= 0.0 && std::isfinite(color_sigma), "color_sigma must be nonnegative");
  require(std::is_sorted(wire_heights.begin(), wire_heights.end()), "wire heights must be ascending");
  for (double w : wire_heights) require(w >= 0.0 && w <= height_m, "wire heights must lie within the tree");
}

ClassCounts class_counts(const SynthTreeSpec& spec) {
  ClassCounts c;
  const auto n = static_cast<double>(spec.point_count);
  c.trunk = static_cast<std::size_t>(std::llround(spec.trunk_fraction * n));
  const std::size_t foliage = spec.point_count - c.trunk;
  c.yellow = static_cast<std::size_t>(std::llround(spec.yellow_fraction * static_cast<double>(foliage)));
  c.green = foliage - c.yellow;
  return c;
}

SynthTree gen_tree(const SynthTreeSpec& spec) {
  spec.validate();
  SynthTree out;
  out.counts = class_counts(spec);
  out.labels.reserve(spec.point_count);
  out.labels.insert(out.labels.end(), out.counts.green, Label::Green);
  out.labels.insert(out.labels.end(), out.counts.yellow, Label::Yellow);
  out.labels.insert(out.labels.end(), out.counts.trunk, Label::Trunk);
  Rng rng(detail::mix_seed(spec.seed, 0));
  detail::shuffle(out.labels, rng);

  const double crown_center = spec.base_height_m + 0.5 * (spec.trunk_height_m + spec.height_m);
  const double crown_h = 0.5 * (spec.height_m - spec.trunk_height_m);
  const double crown_w = 0.5 * spec.crown_width_m;
  const double crown_d = 0.5 * spec.crown_depth_m;
  const double trunk_top = spec.base_height_m + spec.trunk_height_m + crown_h;
  constexpr double kTrunkRadius = 0.06;

  out.cloud.points.reserve(spec.point_count);
  for (Label label : out.labels) {
    Point p;
    if (label == Label::Trunk) {
      double u, v;
      do {
        u = uniform(rng, -1.0, 1.0);
        v = uniform(rng, -1.0, 1.0);
      } while (u * u + v * v > 1.0);
      p = place(uniform(rng, spec.base_height_m, trunk_top), kTrunkRadius * u, spec.depth_m + kTrunkRadius * v,
                spec.up);
      paint(p, kTrunkBase, spec.color_sigma, rng);
    } else {
      double u, v, w;
      do {
        u = uniform(rng, -1.0, 1.0);
        v = uniform(rng, -1.0, 1.0);
        w = uniform(rng, -1.0, 1.0);
      } while (u * u + v * v + w * w > 1.0);
      p = place(crown_center + crown_h * u, crown_w * v, spec.depth_m + crown_d * w, spec.up);
      paint(p, label == Label::Yellow ? kYellowBase : kGreenBase, spec.color_sigma, rng);
    }
    out.cloud.points.push_back(p);
  }
  out.true_index = out.counts.yellow + out.counts.green == 0
                       ? 0.0
                       : yindex::from_counts(out.counts.yellow, out.counts.green).value;
  return out;
}

const char* to_string(Source s) noexcept {
  switch (s) {
    case Source::Tree: return "tree";
    case Source::Sky: return "sky";
    case Source::Background: return "background";
    case Source::Ground: return "ground";
  }
  return "?";
}

void SynthSceneSpec::validate() const {
  tree.validate();
  filters.validate();
  require(blue_margin > 0, "blue margin must be positive");
  require(depth_margin_m > 0.0, "depth margin must be positive");
  require(ground_margin_m > 0.0, "ground margin must be positive");
  require(ground_margin_m < filters.ground_band_m, "ground margin must be smaller than the ground band");
  require(background_extent_m > 0.0, "background extent must be positive");
  require(filters.sky_blue_threshold + blue_margin <= 255, "sky blue cannot exceed 255");
  require(tree.depth_m + 0.5 * tree.crown_depth_m <= filters.max_depth_m - depth_margin_m,
          "tree must sit inside the depth threshold");
  const double max_tree_blue = std::max({double{kGreenBase[2]}, double{kYellowBase[2]}, double{kTrunkBase[2]}});
  require(max_tree_blue + 8.0 * tree.color_sigma <= filters.sky_blue_threshold,
          "tree colors would reach the sky threshold");
  require(tree.up == filters.up, "tree and filter height axes differ");
}

SynthScene gen_scene(const SynthSceneSpec& spec) {
  spec.validate();
  auto tree = gen_tree(spec.tree);
  Rng rng(detail::mix_seed(spec.tree.seed, 1));
  const auto up = spec.tree.up;
  const double band = spec.filters.ground_band_m;
  const double ground_low = spec.tree.base_height_m - band - spec.ground_margin_m;
  const double ground_high = ground_low + band - spec.ground_margin_m;
  const double top = spec.tree.base_height_m + spec.tree.height_m;
  const double near_depth = 0.5;
  const double far_depth = spec.filters.max_depth_m - spec.depth_margin_m;

  std::vector<Point> points = std::move(tree.cloud.points);
  std::vector<Source> sources(points.size(), Source::Tree);
  std::vector<Label> labels = std::move(tree.labels);
  auto add = [&](const Point& p, Source s) {
    points.push_back(p);
    sources.push_back(s);
    labels.push_back(Label::Unassigned);
  };

  const int min_blue = spec.filters.sky_blue_threshold + spec.blue_margin;
  for (std::size_t i = 0; i < spec.sky_points; ++i) {
    auto p = place(uniform(rng, spec.tree.base_height_m + spec.tree.trunk_height_m, top + 1.0),
                   uniform(rng, -2.0, 2.0), uniform(rng, near_depth, 2.0 * spec.filters.max_depth_m), up);
    paint(p, spec.sky_color, spec.tree.color_sigma, rng);
    p.b = static_cast<std::uint8_t>(std::max<int>(p.b, min_blue));
    add(p, Source::Sky);
  }
  const double bg_near = spec.filters.max_depth_m + spec.depth_margin_m;
  for (std::size_t i = 0; i < spec.background_points; ++i) {
    auto p = place(uniform(rng, ground_low, top), uniform(rng, -3.0, 3.0),
                   uniform(rng, bg_near, bg_near + spec.background_extent_m), up);
    paint(p, kGreenBase, spec.tree.color_sigma, rng);
    add(p, Source::Background);
  }
  constexpr Rgb kSoil{110, 95, 70};
  for (std::size_t i = 0; i < spec.ground_points; ++i) {
    // The first ground sample pins the strip's lower edge.
    const double h = i == 0 ? ground_low : uniform(rng, ground_low, ground_high);
    auto p = place(h, uniform(rng, -2.0, 2.0), uniform(rng, near_depth, far_depth), up);
    paint(p, kSoil, spec.tree.color_sigma, rng);
    add(p, Source::Ground);
  }

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  detail::shuffle(order, rng);
  SynthScene scene;
  scene.cloud.source_id = "synthetic";
  scene.cloud.points.reserve(order.size());
  for (auto i : order) {
    scene.cloud.points.push_back(points[i]);
    scene.provenance.push_back(sources[i]);
    scene.labels.push_back(labels[i]);
  }
  return scene;
}

void SynthSeasonSpec::validate() const {
  require(weeks >= 2, "a season needs at least 2 weeks");
  require(!trees.empty(), "a season needs at least one tree");
  require(transition_width_weeks > 0.0, "transition width must be positive");
  require(unit_fraction(floor_fraction) && unit_fraction(ceiling_fraction) && floor_fraction <= ceiling_fraction,
          "floor and ceiling fractions must satisfy 0 <= floor <= ceiling <= 1");
  require(grams_per_point > 0.0, "grams_per_point must be positive");
  require(scene.tree.wire_heights.size() >= 2, "ground truth needs two wire heights");
  for (const auto& t : trees) require(t.leaf_N_percent > 0.0 && t.leaf_N_percent < 10.0, "leaf N out of range");
  scene.validate();
}

double SynthSeasonSpec::yellow_fraction(double leaf_N_percent, int week) const {
  const double onset = onset_week + onset_shift_per_N * (leaf_N_percent - reference_N);
  const double s = 1.0 / (1.0 + std::exp(-(week - onset) / transition_width_weeks));
  return floor_fraction + (ceiling_fraction - floor_fraction) * s;
}

SynthSeasonSpec default_season(std::size_t n_trees, int weeks, std::uint64_t seed, std::size_t per_row) {
  require(n_trees > 0 && per_row > 0, "tree and row counts must be positive");
  SynthSeasonSpec spec;
  spec.weeks = weeks;
  spec.seed = seed;
  spec.onset_week = 0.5 * (weeks + 1);
  spec.scene.tree.point_count = 4000;
  spec.scene.sky_points = 600;
  spec.scene.background_points = 800;
  spec.scene.ground_points = 600;

  std::vector<double> ns(n_trees);
  for (std::size_t i = 0; i < n_trees; ++i)
    ns[i] = n_trees == 1 ? 2.2 : 1.5 + 1.4 * static_cast<double>(i) / static_cast<double>(n_trees - 1);
  Rng rng(detail::mix_seed(seed, 2));
  detail::shuffle(ns, rng);
  for (std::size_t i = 0; i < n_trees; ++i) {
    SeasonTree t;
    const auto number = std::to_string(i + 1);
    t.tree_id = "T" + std::string(number.size() < 2 ? 2 - number.size() : 0, '0') + number;
    t.row = static_cast<int>(i / per_row) + 1;
    t.position_in_row = static_cast<int>(i % per_row) + 1;
    t.leaf_N_percent = std::round(ns[i] * 1000.0) / 1000.0;
    spec.trees.push_back(std::move(t));
  }
  return spec;
}

SynthSeason gen_season(const SynthSeasonSpec& spec) {
  spec.validate();
  SynthSeason season;
  season.manifest.season = spec.season;
  const auto& wires = spec.scene.tree.wire_heights;
  const double band_low = spec.scene.tree.base_height_m + wires[0];
  const double band_high = spec.scene.tree.base_height_m + wires[1];
  for (std::size_t t = 0; t < spec.trees.size(); ++t) {
    const auto& tree = spec.trees[t];
    pcio::ManifestEntry entry;
    entry.tree_id = tree.tree_id;
    entry.row = tree.row;
    entry.position_in_row = tree.position_in_row;
    entry.leaf_N_percent = tree.leaf_N_percent;
    for (int week = 1; week <= spec.weeks; ++week) {
      auto scene_spec = spec.scene;
      scene_spec.tree.seed = detail::mix_seed(spec.seed, static_cast<std::uint64_t>(t) * 1000 + week);
      scene_spec.tree.yellow_fraction = spec.yellow_fraction(tree.leaf_N_percent, week);
      SeasonCloud c;
      c.tree = t;
      c.week = week;
      c.yellow_fraction = scene_spec.tree.yellow_fraction;
      c.scene = gen_scene(scene_spec);
      c.scene.cloud.source_id = tree.tree_id + "_w" + std::to_string(week);
      c.scene.cloud.capture_week = week;
      const auto counts = class_counts(scene_spec.tree);
      c.true_index = yindex::from_counts(counts.yellow, counts.green).value;
      entry.clouds[week] = std::filesystem::path("clouds") / (c.scene.cloud.source_id + ".ply");
      if (week == spec.weeks) {
        std::size_t y = 0, g = 0;
        for (std::size_t i = 0; i < c.scene.cloud.size(); ++i) {
          const double h = spec.scene.tree.up.height(c.scene.cloud.points[i]);
          if (h < band_low || h >= band_high) continue;
          if (c.scene.labels[i] == Label::Yellow) ++y;
          else if (c.scene.labels[i] == Label::Green) ++g;
        }
        entry.ground_truth_yellow_mass_g = static_cast<double>(y) * spec.grams_per_point;
        entry.ground_truth_green_mass_g = static_cast<double>(g) * spec.grams_per_point;
      }
      season.clouds.push_back(std::move(c));
    }
    season.manifest.entries.push_back(std::move(entry));
  }
  return season;
}

void write_season(const SynthSeason& season, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "clouds");
  auto manifest = season.manifest;
  for (auto& e : manifest.entries)
    for (auto& [week, path] : e.clouds) path = dir / path;
  for (const auto& c : season.clouds) {
    const auto& entry = manifest.entries[c.tree];
    pcio::write_cloud(c.scene.cloud, entry.clouds.at(c.week));
  }
  pcio::write_manifest(manifest, dir / "manifest.json");

  std::string truth = kTruthHeader;
  truth += '\n';
  for (const auto& c : season.clouds) {
    const auto& entry = season.manifest.entries[c.tree];
    truth += entry.tree_id + ',' + std::to_string(c.week) + ',' + detail::format_double(*entry.leaf_N_percent) + ',' +
             detail::format_double(c.yellow_fraction) + ',' + detail::format_double(c.true_index) + '\n';
  }
  pcio::write_file_atomic(dir / "truth.csv", truth);
}

pcio::LabelDataset gen_label_dataset(const SynthTreeSpec& spec, std::size_t per_class, int neighbors) {
  auto tree = gen_tree(spec);
  require(tree.counts.green >= per_class && tree.counts.yellow >= per_class && tree.counts.trunk >= per_class,
          "tree has too few points of some class for the requested dataset");
  const features::NeighborIndex index(tree.cloud);
  pcio::LabelDataset out;
  std::array<std::size_t, 3> taken{};
  for (std::size_t i = 0; i < tree.cloud.size(); ++i) {
    const auto label = tree.labels[i];
    auto& n = taken[static_cast<std::size_t>(label)];
    if (n >= per_class) continue;
    ++n;
    out.rows.push_back(features::make_record(tree.cloud, index, i, label, neighbors));
  }
  return out;
}

}  // namespace canopy::synth
