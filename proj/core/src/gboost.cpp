#include "canopy/gboost.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <numeric>
#include <unordered_map>

#include "canopy/error.hpp"
#include "random.hpp"
#include "text_format.hpp"

namespace canopy::gboost {

namespace {

constexpr int kModelVersion = 1;
constexpr const char* kModelFormat = "canopy-gbm";

void softmax_inplace(std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double total = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    total += x;
  }
  for (double& x : v) x /= total;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

nlohmann::json optional_double(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Hyperparameters

void GbmHyperparams::validate() const {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw Error(ErrorKind::Validation, "learning_rate must lie in (0, 1], got " + detail::format_double(learning_rate));
  if (max_depth < 1) throw Error(ErrorKind::Validation, "max_depth must be >= 1, got " + std::to_string(max_depth));
  if (n_estimators < 1)
    throw Error(ErrorKind::Validation, "n_estimators must be >= 1, got " + std::to_string(n_estimators));
}

void to_json(nlohmann::json& j, const GbmHyperparams& hp) {
  j = nlohmann::json{{"learning_rate", hp.learning_rate},
                     {"max_depth", hp.max_depth},
                     {"n_estimators", hp.n_estimators},
                     {"seed", hp.seed}};
}

void from_json(const nlohmann::json& j, GbmHyperparams& hp) {
  GbmHyperparams out;
  out.learning_rate = j.value("learning_rate", out.learning_rate);
  out.max_depth = j.value("max_depth", out.max_depth);
  out.n_estimators = j.value("n_estimators", out.n_estimators);
  out.seed = j.value("seed", out.seed);
  hp = out;
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Model

std::vector<double> GbmModel::raw_scores(std::span<const double> features) const {
  if (features.size() != schema_.arity())
    throw Error(ErrorKind::Arity, "feature vector has " + std::to_string(features.size()) + " values, model expects " +
                                      std::to_string(schema_.arity()));
  std::vector<double> scores = initial_scores_;
  for (const auto& stage : stages_)
    for (std::size_t k = 0; k < stage.size(); ++k) scores[k] += stage[k].evaluate(features);
  return scores;
}

Prediction GbmModel::predict(std::span<const double> features) const {
  auto scores = raw_scores(features);
  Prediction out;
  out.label = classes_[argmax(scores)];
  softmax_inplace(scores);
  out.probabilities = std::move(scores);
  return out;
}

Label GbmModel::predict_label(std::span<const double> features) const {
  constexpr std::size_t kMaxInline = 4;
  if (classes_.size() > kMaxInline) return classes_[argmax(raw_scores(features))];
  if (features.size() != schema_.arity())
    throw Error(ErrorKind::Arity, "feature vector has " + std::to_string(features.size()) + " values, model expects " +
                                      std::to_string(schema_.arity()));
  std::array<double, kMaxInline> scores{};
  const std::size_t K = classes_.size();
  std::copy(initial_scores_.begin(), initial_scores_.end(), scores.begin());
  for (const auto& stage : stages_)
    for (std::size_t k = 0; k < K; ++k) scores[k] += stage[k].evaluate(features);
  return classes_[argmax(std::span<const double>(scores.data(), K))];
}

nlohmann::json GbmModel::to_json() const {
  nlohmann::json doc;
  doc["format"] = kModelFormat;
  doc["version"] = kModelVersion;
  std::vector<std::string> names;
  for (auto c : classes_) names.emplace_back(to_string(c));
  doc["classes"] = names;
  doc["schema"] = schema_;
  doc["hyperparams"] = hyperparams_;
  doc["initial_scores"] = initial_scores_;
  doc["metadata"] = {{"train_accuracy", optional_double(train_accuracy_)},
                     {"test_accuracy", optional_double(test_accuracy_)}};
  auto stages = nlohmann::json::array();
  for (const auto& stage : stages_) {
    auto trees = nlohmann::json::array();
    for (const auto& tree : stage) {
      auto nodes = nlohmann::json::array();
      for (const auto& n : tree.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
      trees.push_back(std::move(nodes));
    }
    stages.push_back(std::move(trees));
  }
  doc["stages"] = std::move(stages);
  return doc;
}

GbmModel GbmModel::from_json(const nlohmann::json& doc) {
  GbmModel m;
  try {
    if (doc.at("format").get<std::string>() != kModelFormat)
      throw Error(ErrorKind::Format, "not a gradient-boosting model document");
    const int version = doc.at("version").get<int>();
    if (version != kModelVersion)
      throw Error(ErrorKind::Format, "unsupported model version " + std::to_string(version));
    for (const auto& name : doc.at("classes")) m.classes_.push_back(parse_label(name.get<std::string>()));
    m.schema_ = doc.at("schema").get<features::FeatureSchema>();
    m.hyperparams_ = doc.at("hyperparams").get<GbmHyperparams>();
    m.initial_scores_ = doc.at("initial_scores").get<std::vector<double>>();
    const auto& meta = doc.at("metadata");
    auto num = [](const nlohmann::json& v) {
      return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    m.train_accuracy_ = num(meta.at("train_accuracy"));
    m.test_accuracy_ = num(meta.at("test_accuracy"));
    const std::size_t K = m.classes_.size();
    const std::size_t arity = m.schema_.arity();
    for (const auto& stage : doc.at("stages")) {
      std::vector<RegressionTree> trees;
      for (const auto& jt : stage) {
        RegressionTree tree;
        for (const auto& jn : jt) {
          RegressionTree::Node n;
          n.feature = jn.at(0).get<int>();
          n.threshold = jn.at(1).get<double>();
          n.left = jn.at(2).get<int>();
          n.right = jn.at(3).get<int>();
          n.value = jn.at(4).get<double>();
          tree.nodes.push_back(n);
        }
        const int count = static_cast<int>(tree.nodes.size());
        if (count == 0) throw Error(ErrorKind::Format, "model contains an empty tree");
        for (const auto& n : tree.nodes) {
          if (n.feature >= 0 && (n.feature >= static_cast<int>(arity) || n.left <= 0 || n.right <= 0 ||
                                 n.left >= count || n.right >= count))
            throw Error(ErrorKind::Format, "model tree node out of range");
        }
        trees.push_back(std::move(tree));
      }
      if (trees.size() != K) throw Error(ErrorKind::Format, "stage does not hold one tree per class");
      m.stages_.push_back(std::move(trees));
    }
    if (m.initial_scores_.size() != K || K < 2) throw Error(ErrorKind::Format, "model class list is inconsistent");
    if (static_cast<int>(m.stages_.size()) != m.hyperparams_.n_estimators)
      throw Error(ErrorKind::Format, "model stage count differs from n_estimators");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed model document: ") + e.what());
  }
  return m;
}

void GbmModel::save(const std::filesystem::path& path) const { pcio::write_file_atomic(path, to_json().dump() + "\n"); }

GbmModel GbmModel::load(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(pcio::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  return from_json(doc);
}

// ---------------------------------------------------------------------------
// Training

Split stratified_split(std::span<const Label> labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0))
    throw Error(ErrorKind::Validation, "split fraction must lie in (0, 1]");
  std::map<Label, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  detail::Rng rng(seed ^ 0x5851f42d4c957f2dULL);
  Split split;
  for (auto& [label, rows] : by_class) {
    detail::shuffle(rows, rng);
    const auto n_train =
        static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rows.size())));
    for (std::size_t i = 0; i < rows.size(); ++i) (i < n_train ? split.train : split.test).push_back(rows[i]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

class Trainer {
 public:
  Trainer(const features::FeatureMatrix& X, std::span<const std::size_t> rows, std::span<const std::size_t> targets,
          std::size_t n_classes, const GbmHyperparams& hp)
      : X_(X), rows_(rows.begin(), rows.end()), targets_(targets.begin(), targets.end()), K_(n_classes), hp_(hp) {
    const std::size_t d = X.cols();
    sorted_.resize(d);
    for (std::size_t f = 0; f < d; ++f) {
      auto& order = sorted_[f];
      order.resize(rows_.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return X_.at(rows_[a], f) < X_.at(rows_[b], f); });
    }
  }

  /// Fits one regression tree on residuals for class k, using the Newton
  /// leaf step of multinomial deviance.
  RegressionTree fit_tree(const std::vector<double>& residual) const {
    const std::size_t n = rows_.size();
    RegressionTree tree;
    tree.nodes.push_back({});
    std::vector<int> node_of(n, 0);
    std::vector<int> frontier{0};

    for (int depth = 0; depth < hp_.max_depth && !frontier.empty(); ++depth) {
      struct Stats {
        double sum = 0.0;
        std::size_t count = 0;
      };
      std::vector<Stats> total(tree.nodes.size());
      for (std::size_t s = 0; s < n; ++s) {
        auto& t = total[static_cast<std::size_t>(node_of[s])];
        t.sum += residual[s];
        ++t.count;
      }
      struct Best {
        double gain = 1e-12;
        int feature = -1;
        double threshold = 0.0;
      };
      std::vector<Best> best(tree.nodes.size());
      std::vector<char> active(tree.nodes.size(), 0);
      for (int id : frontier) active[static_cast<std::size_t>(id)] = total[static_cast<std::size_t>(id)].count >= 2;

      std::vector<Stats> left(tree.nodes.size());
      std::vector<double> prev(tree.nodes.size());
      for (std::size_t f = 0; f < sorted_.size(); ++f) {
        std::fill(left.begin(), left.end(), Stats{});
        for (std::size_t s : sorted_[f]) {
          const auto id = static_cast<std::size_t>(node_of[s]);
          if (!active[id]) continue;
          const double v = X_.at(rows_[s], f);
          auto& l = left[id];
          if (l.count > 0 && v > prev[id]) {
            const auto& t = total[id];
            const double rs = t.sum - l.sum;
            const auto rc = static_cast<double>(t.count - l.count);
            const auto lc = static_cast<double>(l.count);
            const double gain = l.sum * l.sum / lc + rs * rs / rc - t.sum * t.sum / static_cast<double>(t.count);
            if (gain > best[id].gain) {
              double thr = prev[id] + (v - prev[id]) / 2.0;
              if (!(thr < v)) thr = prev[id];
              best[id] = {gain, static_cast<int>(f), thr};
            }
          }
          l.sum += residual[s];
          ++l.count;
          prev[id] = v;
        }
      }

      std::vector<int> next;
      for (int id : frontier) {
        const auto& b = best[static_cast<std::size_t>(id)];
        if (!active[static_cast<std::size_t>(id)] || b.feature < 0) continue;
        const int l = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes.push_back({});
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = b.feature;
        node.threshold = b.threshold;
        node.left = l;
        node.right = l + 1;
        next.push_back(l);
        next.push_back(l + 1);
      }
      if (next.empty()) break;
      for (std::size_t s = 0; s < n; ++s) {
        const auto& node = tree.nodes[static_cast<std::size_t>(node_of[s])];
        if (node.feature < 0) continue;
        node_of[s] = X_.at(rows_[s], static_cast<std::size_t>(node.feature)) <= node.threshold ? node.left : node.right;
      }
      frontier = std::move(next);
    }

    // Newton step per leaf: (K-1)/K * sum(r) / sum(|r|(1-|r|)).
    std::vector<double> num(tree.nodes.size(), 0.0), den(tree.nodes.size(), 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      const auto id = static_cast<std::size_t>(node_of[s]);
      const double r = residual[s];
      num[id] += r;
      den[id] += std::abs(r) * (1.0 - std::abs(r));
    }
    const double scale = static_cast<double>(K_ - 1) / static_cast<double>(K_);
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      auto& node = tree.nodes[id];
      if (node.feature >= 0) continue;
      const double step = den[id] < 1e-150 ? 0.0 : scale * num[id] / den[id];
      node.value = hp_.learning_rate * step;
    }
    return tree;
  }

  TrainResult run(std::vector<Label> classes, const features::FeatureSchema& schema) {
    const std::size_t n = rows_.size();
    GbmModel model;
    model.classes_ = std::move(classes);
    model.schema_ = schema;
    model.hyperparams_ = hp_;

    std::vector<double> prior(K_, 0.0);
    for (auto t : targets_) prior[t] += 1.0;
    model.initial_scores_.resize(K_);
    for (std::size_t k = 0; k < K_; ++k) model.initial_scores_[k] = std::log(prior[k] / static_cast<double>(n));

    std::vector<double> F(n * K_);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t k = 0; k < K_; ++k) F[s * K_ + k] = model.initial_scores_[k];

    TrainResult result;
    std::vector<double> P(n * K_);
    auto update_probabilities = [&] {
      double nll = 0.0;
      std::vector<double> row(K_);
      for (std::size_t s = 0; s < n; ++s) {
        std::copy_n(F.begin() + static_cast<long>(s * K_), K_, row.begin());
        softmax_inplace(row);
        std::copy(row.begin(), row.end(), P.begin() + static_cast<long>(s * K_));
        nll -= std::log(std::max(row[targets_[s]], 1e-300));
      }
      result.deviance_history.push_back(nll / static_cast<double>(n));
    };
    update_probabilities();

    std::vector<double> residual(n);
    for (int m = 0; m < hp_.n_estimators; ++m) {
      std::vector<RegressionTree> stage;
      stage.reserve(K_);
      for (std::size_t k = 0; k < K_; ++k) {
        for (std::size_t s = 0; s < n; ++s) residual[s] = (targets_[s] == k ? 1.0 : 0.0) - P[s * K_ + k];
        stage.push_back(fit_tree(residual));
      }
      for (std::size_t s = 0; s < n; ++s) {
        const auto x = X_.row(rows_[s]);
        for (std::size_t k = 0; k < K_; ++k) F[s * K_ + k] += stage[k].evaluate(x);
      }
      model.stages_.push_back(std::move(stage));
      update_probabilities();
    }
    result.model = std::move(model);
    return result;
  }

 private:
  const features::FeatureMatrix& X_;
  std::vector<std::size_t> rows_;
  std::vector<std::size_t> targets_;
  std::size_t K_;
  GbmHyperparams hp_;
  std::vector<std::vector<std::size_t>> sorted_;  // per feature, positions into rows_ by ascending value
};

namespace {

double accuracy(const GbmModel& model, const features::FeatureMatrix& X, std::span<const Label> y,
                std::span<const std::size_t> rows) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t correct = 0;
  for (auto r : rows)
    if (model.predict_label(X.row(r)) == y[r]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

}  // namespace

TrainResult fit(const features::FeatureMatrix& X, std::span<const Label> y, const features::FeatureSchema& schema,
                const GbmHyperparams& hp, double train_fraction) {
  hp.validate();
  schema.validate();
  if (X.cols() != schema.arity())
    throw Error(ErrorKind::Arity, "feature matrix has " + std::to_string(X.cols()) + " columns, schema expects " +
                                      std::to_string(schema.arity()));
  if (X.rows() != y.size()) throw Error(ErrorKind::Arity, "feature rows and labels differ in length");

  std::map<Label, std::size_t> counts;
  for (auto l : y) {
    if (l == Label::Unassigned) throw Error(ErrorKind::Validation, "training labels must be Green, Yellow or Trunk");
    ++counts[l];
  }
  if (counts.size() < 2)
    throw Error(ErrorKind::DegenerateLabels, "training needs at least two classes, dataset has " +
                                                 std::to_string(counts.size()));
  for (const auto& [label, c] : counts) {
    if (c < kMinRowsPerClass)
      throw Error(ErrorKind::InsufficientData, "class " + std::string(to_string(label)) + " has " + std::to_string(c) +
                                                   " rows, need at least " + std::to_string(kMinRowsPerClass));
  }

  std::vector<Label> classes;
  std::map<Label, std::size_t> class_index;
  for (const auto& [label, c] : counts) {
    class_index[label] = classes.size();
    classes.push_back(label);
  }

  const Split split = stratified_split(y, train_fraction, hp.seed);
  std::vector<std::size_t> targets;
  targets.reserve(split.train.size());
  for (auto r : split.train) targets.push_back(class_index[y[r]]);

  Trainer trainer(X, split.train, targets, classes.size(), hp);
  TrainResult result = trainer.run(classes, schema);
  result.train_rows = split.train.size();
  result.test_rows = split.test.size();
  result.train_accuracy = accuracy(result.model, X, y, split.train);
  result.test_accuracy = accuracy(result.model, X, y, split.test);
  result.model.train_accuracy_ = result.train_accuracy;
  result.model.test_accuracy_ = result.test_accuracy;
  return result;
}

TrainResult train(const pcio::LabelDataset& dataset, const features::FeatureSchema& schema, const GbmHyperparams& hp,
                  double train_fraction) {
  hp.validate();
  const auto X = features::feature_matrix(dataset.rows, schema);
  std::vector<Label> y;
  y.reserve(dataset.rows.size());
  for (const auto& r : dataset.rows) y.push_back(r.label);
  return fit(X, y, schema, hp, train_fraction);
}

// ---------------------------------------------------------------------------
// Sweep

std::vector<GbmHyperparams> make_grid(std::span<const double> learning_rates, std::span<const int> max_depths,
                                      std::span<const int> n_estimators, std::uint64_t seed) {
  std::vector<GbmHyperparams> grid;
  for (double lr : learning_rates)
    for (int d : max_depths)
      for (int n : n_estimators) grid.push_back({lr, d, n, seed});
  return grid;
}

std::vector<GbmHyperparams> standard_grid(std::uint64_t seed) {
  const double lrs[] = {0.1, 0.5, 1.0};
  const int depths[] = {1, 2, 3, 4, 5};
  const int ns[] = {100, 500, 1000};
  return make_grid(lrs, depths, ns, seed);
}

namespace {

std::vector<MarginalSummary> marginals(const std::vector<SweepRow>& rows) {
  std::vector<MarginalSummary> out;
  auto summarize = [&](const char* name, auto key) {
    std::map<double, std::vector<const SweepRow*>> groups;
    for (const auto& r : rows)
      if (r.train_accuracy && r.test_accuracy && !std::isnan(*r.test_accuracy)) groups[key(r.hp)].push_back(&r);
    for (const auto& [value, members] : groups) {
      MarginalSummary m;
      m.parameter = name;
      m.value = value;
      m.runs = members.size();
      m.train_min = m.test_min = std::numeric_limits<double>::infinity();
      m.train_max = m.test_max = -std::numeric_limits<double>::infinity();
      for (const auto* r : members) {
        m.train_min = std::min(m.train_min, *r->train_accuracy);
        m.train_max = std::max(m.train_max, *r->train_accuracy);
        m.train_mean += *r->train_accuracy;
        m.test_min = std::min(m.test_min, *r->test_accuracy);
        m.test_max = std::max(m.test_max, *r->test_accuracy);
        m.test_mean += *r->test_accuracy;
      }
      m.train_mean /= static_cast<double>(members.size());
      m.test_mean /= static_cast<double>(members.size());
      out.push_back(m);
    }
  };
  summarize("learning_rate", [](const GbmHyperparams& hp) { return hp.learning_rate; });
  summarize("max_depth", [](const GbmHyperparams& hp) { return static_cast<double>(hp.max_depth); });
  summarize("n_estimators", [](const GbmHyperparams& hp) { return static_cast<double>(hp.n_estimators); });
  return out;
}

}  // namespace

SweepReport sweep(const pcio::LabelDataset& dataset, const features::FeatureSchema& schema,
                  std::span<const GbmHyperparams> grid, double train_fraction) {
  if (grid.empty()) throw Error(ErrorKind::Validation, "sweep grid is empty");
  SweepReport report;
  for (const auto& hp : grid) {
    SweepRow row;
    row.hp = hp;
    try {
      const auto res = train(dataset, schema, hp, train_fraction);
      row.train_accuracy = res.train_accuracy;
      row.test_accuracy = res.test_accuracy;
    } catch (const Error& e) {
      row.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
    report.rows.push_back(std::move(row));
  }
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    if (!r.test_accuracy || std::isnan(*r.test_accuracy)) continue;
    if (!report.best || *r.test_accuracy > *report.rows[*report.best].test_accuracy) report.best = i;
  }
  report.marginals = marginals(report.rows);
  return report;
}

std::string format_sweep_csv(const SweepReport& report) {
  using detail::format_double;
  std::string out = "learning_rate,max_depth,n_estimators,seed,train_accuracy,test_accuracy,selected,error\n";
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    out += format_double(r.hp.learning_rate) + ',' + std::to_string(r.hp.max_depth) + ',' +
           std::to_string(r.hp.n_estimators) + ',' + std::to_string(r.hp.seed) + ',';
    out += (r.train_accuracy ? format_double(*r.train_accuracy) : std::string()) + ',';
    out += (r.test_accuracy ? format_double(*r.test_accuracy) : std::string()) + ',';
    out += (report.best && *report.best == i) ? "1," : "0,";
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += err + '\n';
  }
  return out;
}

nlohmann::json sweep_to_json(const SweepReport& report) {
  nlohmann::json doc;
  auto rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json jr = {{"hyperparams", r.hp}};
    jr["train_accuracy"] = r.train_accuracy ? nlohmann::json(*r.train_accuracy) : nlohmann::json(nullptr);
    jr["test_accuracy"] =
        r.test_accuracy && !std::isnan(*r.test_accuracy) ? nlohmann::json(*r.test_accuracy) : nlohmann::json(nullptr);
    if (!r.error.empty()) jr["error"] = r.error;
    rows.push_back(std::move(jr));
  }
  doc["rows"] = std::move(rows);
  doc["best"] = report.best ? nlohmann::json(*report.best) : nlohmann::json(nullptr);
  auto ms = nlohmann::json::array();
  for (const auto& m : report.marginals) {
    ms.push_back({{"parameter", m.parameter},
                  {"value", m.value},
                  {"runs", m.runs},
                  {"train", {{"min", m.train_min}, {"max", m.train_max}, {"mean", m.train_mean}}},
                  {"test", {{"min", m.test_min}, {"max", m.test_max}, {"mean", m.test_mean}}}});
  }
  doc["marginals"] = std::move(ms);
  return doc;
}

ClassifiedCloud classify_gbm(const ColoredPointCloud& cloud, const GbmModel& model) {
  if (cloud.empty()) throw Error(ErrorKind::EmptyInput, "classify_gbm on an empty cloud");
  if (model.classes().empty()) throw Error(ErrorKind::Validation, "classify_gbm with an untrained model");
  ClassifiedCloud out;
  out.cloud = cloud;
  out.labels.resize(cloud.size());
  if (model.schema().uses_eigen()) {
    const auto X = features::featurize(cloud, model.schema());
    for (std::size_t i = 0; i < cloud.size(); ++i) out.labels[i] = model.predict_label(X.row(i));
    return out;
  }
  // Color-only features depend on RGB alone, so each distinct color is
  // featurized and scored once.
  std::unordered_map<std::uint32_t, std::uint32_t> slot;
  slot.reserve(cloud.size() / 4);
  ColoredPointCloud palette;
  std::vector<std::uint32_t> which(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    const std::uint32_t key = (std::uint32_t{p.r} << 16) | (std::uint32_t{p.g} << 8) | p.b;
    auto [it, fresh] = slot.try_emplace(key, static_cast<std::uint32_t>(palette.points.size()));
    if (fresh) palette.points.push_back({0.0f, 0.0f, 0.0f, p.r, p.g, p.b});
    which[i] = it->second;
  }
  const auto X = features::featurize(palette, model.schema());
  std::vector<Label> labels(palette.size());
  for (std::size_t j = 0; j < palette.size(); ++j) labels[j] = model.predict_label(X.row(j));
  for (std::size_t i = 0; i < cloud.size(); ++i) out.labels[i] = labels[which[i]];
  return out;
}

}  // namespace canopy::gboost
