#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "canopy/pcio.hpp"
#include "canopy/yindex.hpp"

namespace canopy::fieldstats {

/// Leaf nitrogen bands in % N. Lower bound inclusive, upper exclusive.
enum class NitrogenGroup { VeryLow, Low, Good, High, VeryHigh };

inline constexpr double kLowN = 1.7;
inline constexpr double kGoodN = 2.0;
inline constexpr double kHighN = 2.4;
inline constexpr double kVeryHighN = 2.6;
inline constexpr double kSignificance = 0.05;

const char* to_string(NitrogenGroup g) noexcept;
/// Throws Validation for N <= 0 or non-finite N.
NitrogenGroup assign_group(double leaf_N_percent);

/// Product-moment correlation. Needs equal lengths >= 3 and variance in both.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct AnovaResult {
  double F = 0.0;
  double p = 1.0;
  double df_between = 0.0;
  double df_within = 0.0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  double ms_within = 0.0;
  std::vector<double> group_means;
  std::vector<std::size_t> group_sizes;
};

/// Needs >= 2 groups with >= 2 samples each (InsufficientData) and positive
/// pooled within-group variance (DegenerateInput).
AnovaResult anova_oneway(std::span<const std::vector<double>> groups);

/// Tukey-Kramer comparison of groups i < j.
struct TukeyPair {
  std::size_t group_1 = 0;
  std::size_t group_2 = 0;
  /// mean(group_2) - mean(group_1)
  double mean_difference = 0.0;
  double q = 0.0;
  double p_adjusted = 1.0;
  bool significant = false;
};

std::vector<TukeyPair> tukey_hsd(std::span<const std::vector<double>> groups);

struct NamedTukeyPair {
  NitrogenGroup group_1;
  NitrogenGroup group_2;
  double mean_difference = 0.0;
  double q = 0.0;
  double p_adjusted = 1.0;
  bool significant = false;
};

struct WeekSection {
  int week = 0;
  std::map<NitrogenGroup, std::size_t> group_sizes;
  /// Groups that entered ANOVA, in enum order.
  std::vector<NitrogenGroup> tested_groups;
  std::optional<AnovaResult> anova;
  std::vector<NamedTukeyPair> tukey;
  std::optional<double> pearson_r;
  std::size_t trees_with_N = 0;
  std::vector<std::string> warnings;
};

struct MapRow {
  int week = 0;
  std::string tree_id;
  int row = 0;
  int position_in_row = 0;
  double index = 0.0;
  std::optional<double> leaf_N_percent;
};

struct FieldStatsReport {
  std::string season;
  std::vector<WeekSection> weeks;
  std::vector<MapRow> map;
  std::vector<std::string> warnings;
};

/// Per week: N grouping, ANOVA and Tukey over groups with >= 2 trees, Pearson
/// of index against N. Weeks with fewer than 2 such groups skip the tests and
/// carry a warning. Observations whose tree is not in the manifest are
/// reported as warnings and left out of the map.
FieldStatsReport weekly_report(std::span<const yindex::TreeObservation> observations,
                               const pcio::TreeManifest& manifest);

nlohmann::json report_to_json(const FieldStatsReport& report);

inline constexpr const char* kMapHeader = "week,tree_id,row,position_in_row,index,leaf_N";
std::string format_map_csv(const FieldStatsReport& report);

}  // namespace canopy::fieldstats
