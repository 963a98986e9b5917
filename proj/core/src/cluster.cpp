#include "canopy/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <random>
#include <string>

#include "canopy/colorspace.hpp"
#include "canopy/error.hpp"
#include "random.hpp"

namespace canopy::cluster {

bool Window::intersects(const Window& other) const noexcept {
  return std::max(a_min, other.a_min) <= std::min(a_max, other.a_max) &&
         std::max(b_min, other.b_min) <= std::min(b_max, other.b_max);
}

void MergeWindows::validate() const {
  auto check = [](const Window& w, const char* name) {
    for (double v : {w.a_min, w.a_max, w.b_min, w.b_max})
      if (std::isnan(v)) throw Error(ErrorKind::Validation, std::string(name) + " window has a NaN bound");
    if (w.a_min > w.a_max || w.b_min > w.b_max)
      throw Error(ErrorKind::Validation, std::string(name) + " window has min > max");
  };
  check(green, "green");
  check(yellow, "yellow");
  check(trunk, "trunk");
}

std::vector<std::pair<Label, Label>> MergeWindows::overlaps() const {
  std::vector<std::pair<Label, Label>> out;
  if (green.intersects(yellow)) out.emplace_back(Label::Green, Label::Yellow);
  if (green.intersects(trunk)) out.emplace_back(Label::Green, Label::Trunk);
  if (yellow.intersects(trunk)) out.emplace_back(Label::Yellow, Label::Trunk);
  return out;
}

Label MergeWindows::classify(const AbPoint& center) const noexcept {
  if (green.contains(center)) return Label::Green;
  if (yellow.contains(center)) return Label::Yellow;
  if (trunk.contains(center)) return Label::Trunk;
  return Label::Unassigned;
}

namespace {

nlohmann::json bound(double v) {
  if (std::isinf(v)) return nullptr;
  return v;
}

double read_bound(const nlohmann::json& j, double unbounded) {
  if (j.is_null()) return unbounded;
  if (!j.is_number()) throw Error(ErrorKind::Validation, "window bound must be a number or null");
  return j.get<double>();
}

// A class block replaces the default box entirely; omitted bounds are open.
Window read_window(const nlohmann::json& j) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Window w;
  auto range = [&](const char* key, double& lo, double& hi) {
    if (!j.contains(key)) return;
    const auto& r = j.at(key);
    if (!r.is_array() || r.size() != 2) throw Error(ErrorKind::Validation, std::string(key) + " must be [min, max]");
    lo = read_bound(r[0], -inf);
    hi = read_bound(r[1], inf);
  };
  range("a", w.a_min, w.a_max);
  range("b", w.b_min, w.b_max);
  if (j.contains("a_min")) w.a_min = read_bound(j.at("a_min"), -inf);
  if (j.contains("a_max")) w.a_max = read_bound(j.at("a_max"), inf);
  if (j.contains("b_min")) w.b_min = read_bound(j.at("b_min"), -inf);
  if (j.contains("b_max")) w.b_max = read_bound(j.at("b_max"), inf);
  return w;
}

nlohmann::json write_window(const Window& w) {
  return nlohmann::json{{"a", {bound(w.a_min), bound(w.a_max)}}, {"b", {bound(w.b_min), bound(w.b_max)}}};
}

double sq_dist(const AbPoint& p, const AbPoint& c) {
  const double da = p.a - c.a;
  const double db = p.b - c.b;
  return da * da + db * db;
}

std::uint32_t nearest_center(const AbPoint& p, std::span<const AbPoint> centers, double& best) {
  std::uint32_t best_i = 0;
  best = sq_dist(p, centers[0]);
  for (std::uint32_t c = 1; c < centers.size(); ++c) {
    const double d = sq_dist(p, centers[c]);
    if (d < best) {
      best = d;
      best_i = c;
    }
  }
  return best_i;
}

std::vector<AbPoint> kmeanspp_seed(std::span<const AbPoint> points, int n, detail::Rng& rng) {
  std::vector<AbPoint> centers;
  centers.reserve(static_cast<std::size_t>(n));
  centers.push_back(points[detail::uniform_index(rng, points.size())]);
  std::vector<double> d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d2[i] = sq_dist(points[i], centers[0]);

  while (centers.size() < static_cast<std::size_t>(n)) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = detail::uniform_unit(rng) * total;
      double acc = 0.0;
      pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      // every point coincides with a chosen center
      pick = detail::uniform_index(rng, points.size());
    }
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < points.size(); ++i) d2[i] = std::min(d2[i], sq_dist(points[i], centers.back()));
  }
  return centers;
}

}  // namespace

void to_json(nlohmann::json& j, const MergeWindows& windows) {
  j = nlohmann::json{{"green", write_window(windows.green)},
                     {"yellow", write_window(windows.yellow)},
                     {"trunk", write_window(windows.trunk)}};
}

void from_json(const nlohmann::json& j, MergeWindows& windows) {
  MergeWindows w;
  if (j.contains("green")) w.green = read_window(j.at("green"));
  if (j.contains("yellow")) w.yellow = read_window(j.at("yellow"));
  if (j.contains("trunk")) w.trunk = read_window(j.at("trunk"));
  w.validate();
  windows = w;
}

KMeansResult kmeans_ab(std::span<const AbPoint> points, int n, std::uint64_t seed, const KMeansOptions& options) {
  if (n < 1) throw Error(ErrorKind::Validation, "cluster count must be >= 1");
  if (points.size() < static_cast<std::size_t>(n))
    throw Error(ErrorKind::DegenerateInput, "k-means needs at least " + std::to_string(n) + " points, got " +
                                                std::to_string(points.size()));

  detail::Rng rng(seed);
  KMeansResult result;
  result.centers = kmeanspp_seed(points, n, rng);
  result.assignments.assign(points.size(), 0);

  std::vector<double> sum_a(static_cast<std::size_t>(n));
  std::vector<double> sum_b(static_cast<std::size_t>(n));
  std::vector<std::size_t> counts(static_cast<std::size_t>(n));

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    double objective = 0.0;
    std::fill(sum_a.begin(), sum_a.end(), 0.0);
    std::fill(sum_b.begin(), sum_b.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      double d = 0.0;
      const auto c = nearest_center(points[i], result.centers, d);
      result.assignments[i] = c;
      objective += d;
      sum_a[c] += points[i].a;
      sum_b[c] += points[i].b;
      ++counts[c];
    }
    result.objective_history.push_back(objective);
    result.iterations = iter;

    double movement = 0.0;
    for (std::size_t c = 0; c < result.centers.size(); ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      const AbPoint next{sum_a[c] / static_cast<double>(counts[c]), sum_b[c] / static_cast<double>(counts[c])};
      movement = std::max(movement, std::sqrt(sq_dist(next, result.centers[c])));
      result.centers[c] = next;
    }
    if (movement < options.tolerance) {
      result.converged = true;
      break;
    }
  }

  // Final assignment against the final centers.
  double objective = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double d = 0.0;
    result.assignments[i] = nearest_center(points[i], result.centers, d);
    objective += d;
  }
  result.objective_history.push_back(objective);
  return result;
}

std::vector<Label> merge_clusters(std::span<const AbPoint> centers, std::span<const std::uint32_t> assignments,
                                  const MergeWindows& windows) {
  if (centers.empty()) throw Error(ErrorKind::Validation, "merge_clusters needs at least one center");
  std::vector<Label> cluster_label(centers.size());
  for (std::size_t c = 0; c < centers.size(); ++c) cluster_label[c] = windows.classify(centers[c]);
  std::vector<Label> labels(assignments.size());
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] >= centers.size()) throw Error(ErrorKind::Validation, "assignment refers to a missing center");
    labels[i] = cluster_label[assignments[i]];
  }
  return labels;
}

std::vector<AbPoint> ab_coordinates(const ColoredPointCloud& cloud) {
  std::vector<AbPoint> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    const auto lab = colorspace::srgb_to_lab(p);
    out.push_back({lab.a_star, lab.b_star});
  }
  return out;
}

ClassifiedCloud classify_kmeans(const ColoredPointCloud& cloud, int n, const MergeWindows& windows,
                                std::uint64_t seed) {
  if (cloud.empty()) throw Error(ErrorKind::EmptyInput, "classify_kmeans on an empty cloud");
  windows.validate();
  const auto ab = ab_coordinates(cloud);
  const auto km = kmeans_ab(ab, n, seed);
  ClassifiedCloud out;
  out.cloud = cloud;
  out.labels = merge_clusters(km.centers, km.assignments, windows);
  return out;
}

}  // namespace canopy::cluster
