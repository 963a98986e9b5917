#include "canopy/fieldstats.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "canopy/error.hpp"
#include "canopy/special_functions.hpp"
#include "text_format.hpp"

namespace canopy::fieldstats {

const char* to_string(NitrogenGroup g) noexcept {
  switch (g) {
    case NitrogenGroup::VeryLow: return "VeryLow";
    case NitrogenGroup::Low: return "Low";
    case NitrogenGroup::Good: return "Good";
    case NitrogenGroup::High: return "High";
    case NitrogenGroup::VeryHigh: return "VeryHigh";
  }
  return "?";
}

NitrogenGroup assign_group(double n) {
  if (!std::isfinite(n) || n <= 0.0) throw Error(ErrorKind::Validation, "leaf N must be a positive percentage");
  if (n < kLowN) return NitrogenGroup::VeryLow;
  if (n < kGoodN) return NitrogenGroup::Low;
  if (n < kHighN) return NitrogenGroup::Good;
  if (n < kVeryHighN) return NitrogenGroup::High;
  return NitrogenGroup::VeryHigh;
}

namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void check_groups(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) throw Error(ErrorKind::InsufficientData, "need at least 2 groups");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].size() < 2)
      throw Error(ErrorKind::InsufficientData, "group " + std::to_string(i) + " has fewer than 2 samples");
    for (double x : groups[i])
      if (!std::isfinite(x)) throw Error(ErrorKind::Validation, "non-finite observation");
  }
}

}  // namespace

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorKind::Validation, "pearson needs equal-length inputs");
  if (xs.size() < 3) throw Error(ErrorKind::InsufficientData, "pearson needs at least 3 pairs");
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw Error(ErrorKind::DegenerateInput, "pearson input has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

AnovaResult anova_oneway(std::span<const std::vector<double>> groups) {
  check_groups(groups);
  AnovaResult r;
  std::size_t n_total = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    r.group_means.push_back(mean_of(g));
    r.group_sizes.push_back(g.size());
    n_total += g.size();
    for (double x : g) grand += x;
  }
  grand /= static_cast<double>(n_total);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double d = r.group_means[i] - grand;
    r.ss_between += static_cast<double>(groups[i].size()) * d * d;
    for (double x : groups[i]) r.ss_within += (x - r.group_means[i]) * (x - r.group_means[i]);
  }
  r.df_between = static_cast<double>(groups.size() - 1);
  r.df_within = static_cast<double>(n_total - groups.size());
  if (r.ss_within <= 0.0) throw Error(ErrorKind::DegenerateInput, "no within-group variance");
  r.ms_within = r.ss_within / r.df_within;
  r.F = (r.ss_between / r.df_between) / r.ms_within;
  r.p = stats::f_sf(r.F, r.df_between, r.df_within);
  return r;
}

std::vector<TukeyPair> tukey_hsd(std::span<const std::vector<double>> groups) {
  const auto anova = anova_oneway(groups);
  const auto k = static_cast<int>(groups.size());
  std::vector<TukeyPair> out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      TukeyPair p;
      p.group_1 = i;
      p.group_2 = j;
      p.mean_difference = anova.group_means[j] - anova.group_means[i];
      const double se = std::sqrt(0.5 * anova.ms_within *
                                  (1.0 / static_cast<double>(anova.group_sizes[i]) +
                                   1.0 / static_cast<double>(anova.group_sizes[j])));
      p.q = std::abs(p.mean_difference) / se;
      p.p_adjusted = stats::studentized_range_sf(p.q, k, anova.df_within);
      p.significant = p.p_adjusted < kSignificance;
      out.push_back(p);
    }
  }
  return out;
}

FieldStatsReport weekly_report(std::span<const yindex::TreeObservation> observations,
                               const pcio::TreeManifest& manifest) {
  if (observations.empty()) throw Error(ErrorKind::InsufficientData, "no observations");
  FieldStatsReport report;
  report.season = manifest.season;

  std::map<int, std::vector<const yindex::TreeObservation*>> by_week;
  for (const auto& o : observations) by_week[o.week].push_back(&o);

  for (const auto& [week, obs] : by_week) {
    WeekSection section;
    section.week = week;
    std::map<NitrogenGroup, std::vector<double>> grouped;
    std::vector<double> ns, indices;
    for (const auto* o : obs) {
      const auto* entry = manifest.find(o->tree_id);
      if (!entry) {
        report.warnings.push_back("week " + std::to_string(week) + ": tree '" + o->tree_id + "' not in manifest");
        continue;
      }
      auto n = o->leaf_N_percent ? o->leaf_N_percent : entry->leaf_N_percent;
      report.map.push_back({week, o->tree_id, entry->row, entry->position_in_row, o->index.value, n});
      if (!n) continue;
      grouped[assign_group(*n)].push_back(o->index.value);
      ns.push_back(*n);
      indices.push_back(o->index.value);
    }
    section.trees_with_N = ns.size();
    for (const auto& [g, v] : grouped) section.group_sizes[g] = v.size();

    std::vector<std::vector<double>> tested;
    for (const auto& [g, v] : grouped) {
      if (v.size() < 2) {
        section.warnings.push_back(std::string("group ") + to_string(g) + " has fewer than 2 trees; left out");
        continue;
      }
      section.tested_groups.push_back(g);
      tested.push_back(v);
    }
    if (tested.size() < 2) {
      section.warnings.push_back("fewer than 2 populated nitrogen groups; ANOVA and Tukey skipped");
    } else {
      try {
        section.anova = anova_oneway(tested);
        for (const auto& p : tukey_hsd(tested))
          section.tukey.push_back({section.tested_groups[p.group_1], section.tested_groups[p.group_2],
                                   p.mean_difference, p.q, p.p_adjusted, p.significant});
      } catch (const Error& e) {
        section.warnings.push_back(std::string("ANOVA skipped: ") + e.what());
      }
    }
    if (ns.size() >= 3) {
      try {
        section.pearson_r = pearson(ns, indices);
      } catch (const Error& e) {
        section.warnings.push_back(std::string("Pearson skipped: ") + e.what());
      }
    } else {
      section.warnings.push_back("fewer than 3 trees with leaf N; Pearson skipped");
    }
    report.weeks.push_back(std::move(section));
  }
  return report;
}

nlohmann::json report_to_json(const FieldStatsReport& report) {
  using nlohmann::json;
  json doc;
  doc["season"] = report.season;
  doc["warnings"] = report.warnings;
  doc["weeks"] = json::array();
  for (const auto& s : report.weeks) {
    json w;
    w["week"] = s.week;
    w["trees_with_N"] = s.trees_with_N;
    w["group_sizes"] = json::object();
    for (const auto& [g, n] : s.group_sizes) w["group_sizes"][to_string(g)] = n;
    if (s.anova) {
      const auto& a = *s.anova;
      json groups = json::array();
      for (std::size_t i = 0; i < s.tested_groups.size(); ++i)
        groups.push_back({{"group", to_string(s.tested_groups[i])}, {"n", a.group_sizes[i]}, {"mean", a.group_means[i]}});
      w["anova"] = {{"F", a.F},
                    {"p", a.p},
                    {"df_between", a.df_between},
                    {"df_within", a.df_within},
                    {"ss_between", a.ss_between},
                    {"ss_within", a.ss_within},
                    {"groups", groups}};
    } else {
      w["anova"] = nullptr;
    }
    w["tukey"] = json::array();
    for (const auto& p : s.tukey)
      w["tukey"].push_back({{"group_1", to_string(p.group_1)},
                            {"group_2", to_string(p.group_2)},
                            {"mean_difference", p.mean_difference},
                            {"q", p.q},
                            {"p_adjusted", p.p_adjusted},
                            {"significant", p.significant}});
    w["pearson_r"] = s.pearson_r ? json(*s.pearson_r) : json(nullptr);
    w["warnings"] = s.warnings;
    doc["weeks"].push_back(std::move(w));
  }
  return doc;
}

std::string format_map_csv(const FieldStatsReport& report) {
  std::string out = kMapHeader;
  out += '\n';
  for (const auto& m : report.map) {
    out += std::to_string(m.week) + ',' + m.tree_id + ',' + std::to_string(m.row) + ',' +
           std::to_string(m.position_in_row) + ',' + detail::format_double(m.index) + ',';
    if (m.leaf_N_percent) out += detail::format_double(*m.leaf_N_percent);
    out += '\n';
  }
  return out;
}

}  // namespace canopy::fieldstats
