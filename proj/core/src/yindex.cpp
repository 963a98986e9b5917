#include "canopy/yindex.hpp"

#include "canopy/error.hpp"
#include "text_format.hpp"

namespace canopy::yindex {

YellownessIndex from_counts(std::size_t yellow, std::size_t green) {
  if (yellow + green == 0) throw Error(ErrorKind::NoFoliage, "no Green or Yellow points to index");
  const auto y = static_cast<double>(yellow);
  const auto g = static_cast<double>(green);
  return {(y - g) / (y + g), yellow, green};
}

YellownessIndex yellowness(std::span<const Label> labels) {
  std::size_t y = 0, g = 0;
  for (auto l : labels) {
    if (l == Label::Yellow) ++y;
    else if (l == Label::Green) ++g;
  }
  return from_counts(y, g);
}

YellownessIndex yellowness(const ClassifiedCloud& classified) {
  if (classified.labels.size() != classified.cloud.size())
    throw Error(ErrorKind::Validation, "classified cloud has a label count different from its point count");
  return yellowness(classified.labels);
}

double ground_truth_index(double yellow_mass_g, double green_mass_g) {
  if (!(yellow_mass_g >= 0.0) || !(green_mass_g >= 0.0))
    throw Error(ErrorKind::Validation, "leaf masses must be nonnegative");
  if (yellow_mass_g + green_mass_g == 0.0) throw Error(ErrorKind::NoFoliage, "both leaf masses are zero");
  return (yellow_mass_g - green_mass_g) / (yellow_mass_g + green_mass_g);
}

ColoredPointCloud crop_band(const ColoredPointCloud& cloud, double low_height_m, double high_height_m, HeightAxis up) {
  if (!(low_height_m < high_height_m)) throw Error(ErrorKind::Validation, "crop band needs low < high");
  ColoredPointCloud out;
  out.source_id = cloud.source_id;
  out.capture_week = cloud.capture_week;
  for (const auto& p : cloud.points) {
    const double h = up.height(p);
    if (h >= low_height_m && h < high_height_m) out.points.push_back(p);
  }
  return out;
}

ValidationReport validate(std::span<const ValidationPair> pairs) {
  if (pairs.size() < 3)
    throw Error(ErrorKind::InsufficientData, "validation needs at least 3 paired observations, got " +
                                                 std::to_string(pairs.size()));
  const auto n = static_cast<double>(pairs.size());
  double mean_e = 0.0, mean_t = 0.0;
  for (const auto& p : pairs) {
    mean_e += p.estimate;
    mean_t += p.truth;
  }
  mean_e /= n;
  mean_t /= n;
  double see = 0.0, stt = 0.0, set = 0.0, sres_identity = 0.0;
  for (const auto& p : pairs) {
    const double de = p.estimate - mean_e;
    const double dt = p.truth - mean_t;
    see += de * de;
    stt += dt * dt;
    set += de * dt;
    sres_identity += (p.truth - p.estimate) * (p.truth - p.estimate);
  }
  if (stt <= 0.0) throw Error(ErrorKind::DegenerateInput, "ground-truth indices do not vary");

  ValidationReport report;
  report.slope = see > 0.0 ? set / see : 0.0;
  report.intercept = mean_t - report.slope * mean_e;
  double sres_fit = 0.0;
  for (const auto& p : pairs) {
    const double r = p.truth - (report.intercept + report.slope * p.estimate);
    sres_fit += r * r;
    report.residuals.push_back(p.truth - p.estimate);
  }
  report.r_squared = 1.0 - sres_fit / stt;
  report.r_squared_identity = 1.0 - sres_identity / stt;
  return report;
}

std::string format_observations(std::span<const TreeObservation> observations) {
  using detail::format_double;
  std::string out = kObservationHeader;
  out += '\n';
  for (const auto& o : observations) {
    out += o.tree_id + ',' + std::to_string(o.week) + ',' + std::to_string(o.index.yellow_count) + ',' +
           std::to_string(o.index.green_count) + ',' + format_double(o.index.value) + ',';
    if (o.ground_truth_index) out += format_double(*o.ground_truth_index);
    out += ',';
    if (o.leaf_N_percent) out += format_double(*o.leaf_N_percent);
    out += '\n';
  }
  return out;
}

std::vector<TreeObservation> parse_observations(std::string_view text) {
  detail::LineReader reader(text);
  std::string_view line;
  if (!reader.next(line) || detail::trim(line) != kObservationHeader)
    throw Error(ErrorKind::Parse, std::string("observations: line 1: header must be '") + kObservationHeader + "'");
  std::vector<TreeObservation> out;
  while (reader.next(line)) {
    if (detail::trim(line).empty()) continue;
    const auto where = "observations: line " + std::to_string(reader.line_number()) + ": ";
    const auto cells = detail::split(line, ',');
    if (cells.size() != 7) throw Error(ErrorKind::Parse, where + "expected 7 columns");
    TreeObservation o;
    o.tree_id = std::string(detail::trim(cells[0]));
    const auto week = detail::parse_int(cells[1]);
    const auto y = detail::parse_int(cells[2]);
    const auto g = detail::parse_int(cells[3]);
    if (!week || *week < 1 || !y || *y < 0 || !g || *g < 0) throw Error(ErrorKind::Parse, where + "bad week or counts");
    o.week = static_cast<int>(*week);
    o.index = from_counts(static_cast<std::size_t>(*y), static_cast<std::size_t>(*g));
    if (!detail::trim(cells[5]).empty()) {
      auto v = detail::parse_double(cells[5]);
      if (!v || *v < -1.0 || *v > 1.0) throw Error(ErrorKind::Validation, where + "ground_truth must lie in [-1, 1]");
      o.ground_truth_index = *v;
    }
    if (!detail::trim(cells[6]).empty()) {
      auto v = detail::parse_double(cells[6]);
      if (!v) throw Error(ErrorKind::Parse, where + "bad leaf_N");
      o.leaf_N_percent = *v;
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace canopy::yindex
