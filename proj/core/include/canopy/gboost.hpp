#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "canopy/cloud.hpp"
#include "canopy/features.hpp"
#include "canopy/pcio.hpp"

namespace canopy::gboost {

struct GbmHyperparams {
  double learning_rate = 0.1;
  int max_depth = 1;
  int n_estimators = 100;
  std::uint64_t seed = 0;

  /// learning_rate in (0, 1], max_depth >= 1, n_estimators >= 1.
  void validate() const;

  friend bool operator==(const GbmHyperparams&, const GbmHyperparams&) = default;
};

void to_json(nlohmann::json& j, const GbmHyperparams& hp);
void from_json(const nlohmann::json& j, GbmHyperparams& hp);

/// Depth-limited binary regression tree stored as a flat node array.
/// Samples with x[feature] <= threshold descend left.
struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double evaluate(std::span<const double> x) const noexcept {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }
  int depth() const;
};

struct TrainResult;

struct Prediction {
  Label label = Label::Green;
  /// Aligned with GbmModel::classes(); sums to 1.
  std::vector<double> probabilities;
};

/// Multiclass gradient-boosted trees with a softmax link: one regression tree
/// per class per stage, leaf values already scaled by the learning rate.
class GbmModel {
 public:
  GbmModel() = default;

  const std::vector<Label>& classes() const noexcept { return classes_; }
  const features::FeatureSchema& schema() const noexcept { return schema_; }
  const GbmHyperparams& hyperparams() const noexcept { return hyperparams_; }
  const std::vector<double>& initial_scores() const noexcept { return initial_scores_; }
  /// stages()[m][k] is the tree fit for class k at stage m.
  const std::vector<std::vector<RegressionTree>>& stages() const noexcept { return stages_; }

  double train_accuracy() const noexcept { return train_accuracy_; }
  /// NaN when trained without a held-out split.
  double test_accuracy() const noexcept { return test_accuracy_; }

  /// Summed tree outputs per class. Throws Arity on a wrong-length vector.
  std::vector<double> raw_scores(std::span<const double> features) const;
  Prediction predict(std::span<const double> features) const;
  /// Argmax only; skips the softmax.
  Label predict_label(std::span<const double> features) const;

  nlohmann::json to_json() const;
  static GbmModel from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static GbmModel load(const std::filesystem::path& path);

 private:
  friend class Trainer;
  friend TrainResult fit(const features::FeatureMatrix&, std::span<const Label>, const features::FeatureSchema&,
                         const GbmHyperparams&, double);

  std::vector<Label> classes_;
  features::FeatureSchema schema_;
  GbmHyperparams hyperparams_;
  std::vector<double> initial_scores_;
  std::vector<std::vector<RegressionTree>> stages_;
  double train_accuracy_ = 0.0;
  double test_accuracy_ = 0.0;
};

struct TrainResult {
  GbmModel model;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  /// Mean multinomial negative log-likelihood on the training rows: entry 0
  /// is the prior-only model, entry m is after stage m.
  std::vector<double> deviance_history;
};

/// Stratified deterministic split of row indices: per class, a seeded shuffle
/// then the first round(fraction * n_class) rows go to training.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
Split stratified_split(std::span<const Label> labels, double train_fraction, std::uint64_t seed);

/// Fits on feature rows directly. X.cols() must equal schema.arity().
TrainResult fit(const features::FeatureMatrix& X, std::span<const Label> y, const features::FeatureSchema& schema,
                const GbmHyperparams& hp, double train_fraction);

/// Featurizes the dataset with the schema, splits, fits and scores.
/// Throws DegenerateLabels for a single-class dataset, InsufficientData when
/// a class has fewer than 10 rows, Validation for bad hyperparameters.
TrainResult train(const pcio::LabelDataset& dataset, const features::FeatureSchema& schema, const GbmHyperparams& hp,
                  double train_fraction = 0.8);

inline constexpr std::size_t kMinRowsPerClass = 10;

struct SweepRow {
  GbmHyperparams hp;
  std::optional<double> train_accuracy;
  std::optional<double> test_accuracy;
  std::string error;
};

/// Range of accuracies observed at one value of one hyperparameter while the
/// others vary.
struct MarginalSummary {
  std::string parameter;
  double value = 0.0;
  double train_min = 0.0, train_max = 0.0, train_mean = 0.0;
  double test_min = 0.0, test_max = 0.0, test_mean = 0.0;
  std::size_t runs = 0;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  /// Index into rows of the best held-out accuracy (first on ties).
  std::optional<std::size_t> best;
  std::vector<MarginalSummary> marginals;
};

/// Full factorial grid over the given axes, ordered lr-major then depth then n.
std::vector<GbmHyperparams> make_grid(std::span<const double> learning_rates, std::span<const int> max_depths,
                                      std::span<const int> n_estimators, std::uint64_t seed);
/// lr {0.1, 0.5, 1.0} x depth {1..5} x n {100, 500, 1000}.
std::vector<GbmHyperparams> standard_grid(std::uint64_t seed);

/// Trains every grid cell; a failing cell records its error and the sweep continues.
SweepReport sweep(const pcio::LabelDataset& dataset, const features::FeatureSchema& schema,
                  std::span<const GbmHyperparams> grid, double train_fraction = 0.8);

std::string format_sweep_csv(const SweepReport& report);
nlohmann::json sweep_to_json(const SweepReport& report);

/// Per-point featurize + predict.
ClassifiedCloud classify_gbm(const ColoredPointCloud& cloud, const GbmModel& model);

}  // namespace canopy::gboost
