#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "canopy/error.hpp"
#include "canopy/gboost.hpp"
#include "canopy/synth.hpp"
#include "support/gen.hpp"

using namespace canopy;
using namespace canopy::gboost;
using canopy::features::feature_row;
using testsupport::Gen;
using testsupport::TempDir;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;
}

LabeledPointRecord rec(Label l, double a, double b, int r = 0, int g = 0, int bl = 0) {
  LabeledPointRecord x;
  x.label = l;
  x.a_star = a;
  x.b_star = b;
  x.r = static_cast<std::uint8_t>(r);
  x.g = static_cast<std::uint8_t>(g);
  x.b = static_cast<std::uint8_t>(bl);
  return x;
}

// a* < 0 is Green, otherwise Yellow; the other columns are noise.
pcio::LabelDataset separable(Gen& g, std::size_t n) {
  pcio::LabelDataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = g.real(-50, 50);
    ds.rows.push_back(rec(a < 0 ? Label::Green : Label::Yellow, a, g.real(-50, 50), g.byte(), g.byte(), g.byte()));
  }
  return ds;
}

// Two heavily overlapping classes: no classifier reaches perfect accuracy.
pcio::LabelDataset noisy(Gen& g, std::size_t n) {
  pcio::LabelDataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    const bool yellow = g.coin();
    const double shift = yellow ? 4.0 : 0.0;
    ds.rows.push_back(rec(yellow ? Label::Yellow : Label::Green, g.normal(shift, 6), g.normal(shift, 6),
                          static_cast<int>(g.integer(0, 255)), static_cast<int>(g.integer(0, 255)),
                          static_cast<int>(g.integer(0, 255))));
  }
  return ds;
}

}  // namespace

TEST(Hyperparams, Validation) {
  GbmHyperparams hp;
  EXPECT_NO_THROW(hp.validate());
  hp.max_depth = 0;
  EXPECT_EQ(kind_of([&] { hp.validate(); }), ErrorKind::Validation);
  hp = {};
  hp.learning_rate = 0.0;
  EXPECT_EQ(kind_of([&] { hp.validate(); }), ErrorKind::Validation);
  hp.learning_rate = 1.5;
  EXPECT_EQ(kind_of([&] { hp.validate(); }), ErrorKind::Validation);
  hp = {};
  hp.n_estimators = 0;
  EXPECT_EQ(kind_of([&] { hp.validate(); }), ErrorKind::Validation);
  Gen g(1);
  const auto ds = separable(g, 100);
  GbmHyperparams bad;
  bad.max_depth = 0;
  EXPECT_EQ(kind_of([&] { train(ds, {}, bad); }), ErrorKind::Validation);
}

TEST(Train, SeparableDataPerfectHeldOutAccuracy) {
  for (auto seed : testsupport::seeds(5)) {
    Gen g(seed);
    const auto ds = separable(g, 400);
    GbmHyperparams hp;  // 0.1, 1, 100
    hp.seed = seed;
    const auto r = train(ds, {}, hp, 0.8);
    EXPECT_EQ(r.test_accuracy, 1.0) << "seed " << seed;
    EXPECT_EQ(r.train_accuracy, 1.0);
    EXPECT_EQ(r.train_rows + r.test_rows, ds.rows.size());
    for (const auto& row : ds.rows) ASSERT_EQ(r.model.predict(feature_row(row, {})).label, row.label);
  }
}

TEST(Train, DevianceNonIncreasing) {
  for (auto seed : testsupport::seeds(8, 2)) {
    Gen g(seed);
    const auto ds = g.coin() ? noisy(g, 300) : separable(g, 300);
    GbmHyperparams hp;
    hp.learning_rate = g.real(0.05, 1.0);
    hp.max_depth = static_cast<int>(g.integer(1, 4));
    hp.n_estimators = 60;
    const auto r = train(ds, {}, hp);
    ASSERT_EQ(r.deviance_history.size(), 61u);
    for (std::size_t m = 1; m < r.deviance_history.size(); ++m)
      ASSERT_LE(r.deviance_history[m], r.deviance_history[m - 1] + 1e-12) << "seed " << seed << " stage " << m;
  }
}

TEST(Train, ModelShape) {
  Gen g(3);
  auto ds = separable(g, 200);
  for (int i = 0; i < 30; ++i) ds.rows.push_back(rec(Label::Trunk, g.real(60, 80), 10));
  GbmHyperparams hp;
  hp.max_depth = 3;
  hp.n_estimators = 25;
  const auto r = train(ds, {}, hp);
  const auto& m = r.model;
  EXPECT_EQ(m.classes(), (std::vector<Label>{Label::Green, Label::Yellow, Label::Trunk}));
  ASSERT_EQ(m.stages().size(), 25u);
  for (const auto& stage : m.stages()) {
    ASSERT_EQ(stage.size(), 3u);
    for (const auto& t : stage) ASSERT_LE(t.depth(), 3);
  }
  EXPECT_EQ(m.schema().arity(), 5u);
  EXPECT_EQ(m.hyperparams(), hp);
}

TEST(Train, ConstantFeatureNinetyTenGivesPrior) {
  pcio::LabelDataset ds;
  for (int i = 0; i < 90; ++i) ds.rows.push_back(rec(Label::Green, 1, 1, 1, 1, 1));
  for (int i = 0; i < 10; ++i) ds.rows.push_back(rec(Label::Yellow, 1, 1, 1, 1, 1));
  const auto r = train(ds, {}, {}, 0.8);
  const auto p = r.model.predict(feature_row(ds.rows[0], {}));
  EXPECT_EQ(p.label, Label::Green);
  EXPECT_NEAR(p.probabilities[0], 0.9, 1e-9);
  EXPECT_NEAR(p.probabilities[1], 0.1, 1e-9);
}

TEST(Train, TinyLearningRateSingleStageGivesPriors) {
  Gen g(4);
  auto ds = separable(g, 120);
  for (int i = 0; i < 40; ++i) ds.rows.push_back(rec(Label::Trunk, g.real(-50, 50), 90));
  GbmHyperparams hp;
  hp.learning_rate = 1e-12;
  hp.n_estimators = 1;
  const auto r = train(ds, {}, hp, 1.0);
  std::map<Label, double> prior;
  for (const auto& row : ds.rows) prior[row.label] += 1.0 / static_cast<double>(ds.rows.size());
  const auto majority = std::max_element(prior.begin(), prior.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
  for (const auto& row : ds.rows) {
    const auto p = r.model.predict(feature_row(row, {}));
    ASSERT_EQ(p.label, majority);
    for (std::size_t k = 0; k < r.model.classes().size(); ++k)
      ASSERT_NEAR(p.probabilities[k], prior[r.model.classes()[k]], 1e-9);
  }
}

// One depth-1 stage with learning rate 1 on two point masses: the Newton
// leaf step (K-1)/K * sum(r) / sum(|r|(1-|r|)) is exactly 1 for each class,
// so P(first class | x in its mass) = 1 / (1 + e^-2).
TEST(Train, SingleStageMatchesClosedForm) {
  pcio::LabelDataset ds;
  for (int i = 0; i < 10; ++i) ds.rows.push_back(rec(Label::Green, 0, 0));
  for (int i = 0; i < 10; ++i) ds.rows.push_back(rec(Label::Yellow, 1, 0));
  GbmHyperparams hp;
  hp.learning_rate = 1.0;
  hp.n_estimators = 1;
  const auto r = train(ds, {}, hp, 1.0);
  const double expected = 1.0 / (1.0 + std::exp(-2.0));
  const auto pg = r.model.predict(feature_row(ds.rows[0], {}));
  const auto py = r.model.predict(feature_row(ds.rows[15], {}));
  EXPECT_NEAR(pg.probabilities[0], expected, 1e-12);
  EXPECT_NEAR(py.probabilities[1], expected, 1e-12);
  const auto raw = r.model.raw_scores(feature_row(ds.rows[0], {}));
  EXPECT_NEAR(raw[0], std::log(0.5) + 1.0, 1e-12);
  EXPECT_NEAR(raw[1], std::log(0.5) - 1.0, 1e-12);
}

TEST(Train, Errors) {
  pcio::LabelDataset one;
  for (int i = 0; i < 30; ++i) one.rows.push_back(rec(Label::Green, i, 0));
  EXPECT_EQ(kind_of([&] { train(one, {}, {}); }), ErrorKind::DegenerateLabels);
  auto few = one;
  for (int i = 0; i < 9; ++i) few.rows.push_back(rec(Label::Yellow, i, 5));
  EXPECT_EQ(kind_of([&] { train(few, {}, {}); }), ErrorKind::InsufficientData);
  features::FeatureMatrix X(20, 3);
  std::vector<Label> y(20, Label::Green);
  EXPECT_EQ(kind_of([&] { fit(X, y, {}, {}, 0.8); }), ErrorKind::Arity);
}

TEST(Predict, ProbabilitiesSumToOneAndArityChecked) {
  Gen g(5);
  auto ds = noisy(g, 300);
  for (int i = 0; i < 20; ++i) ds.rows.push_back(rec(Label::Trunk, 30, 30));
  GbmHyperparams hp;
  hp.max_depth = 2;
  hp.n_estimators = 30;
  const auto m = train(ds, {}, hp).model;
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> x{g.real(-100, 100), g.real(-100, 100), g.real(0, 255), g.real(0, 255), g.real(0, 255)};
    const auto p = m.predict(x);
    double s = 0;
    for (double v : p.probabilities) {
      ASSERT_GE(v, 0.0);
      s += v;
    }
    ASSERT_NEAR(s, 1.0, 1e-9);
    ASSERT_EQ(p.label, m.predict_label(x));
  }
  EXPECT_EQ(kind_of([&] { m.predict(std::vector<double>{1, 2}); }), ErrorKind::Arity);
  EXPECT_EQ(kind_of([&] { m.predict_label(std::vector<double>(6, 0.0)); }), ErrorKind::Arity);
}

TEST(Model, SaveLoadReproducesPredictionsBitForBit) {
  TempDir dir;
  Gen g(6);
  auto ds = noisy(g, 200);
  for (int i = 0; i < 20; ++i) ds.rows.push_back(rec(Label::Trunk, g.normal(20, 3), 20));
  GbmHyperparams hp;
  hp.max_depth = 3;
  hp.n_estimators = 40;
  hp.learning_rate = 0.37;
  const auto m = train(ds, features::FeatureSchema{}, hp).model;
  m.save(dir / "model.json");
  const auto back = GbmModel::load(dir / "model.json");
  EXPECT_EQ(back.to_json(), m.to_json());
  EXPECT_EQ(back.classes(), m.classes());
  EXPECT_EQ(back.hyperparams(), m.hyperparams());
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> x{g.normal(0, 30), g.normal(0, 30), g.real(0, 255), g.real(0, 255), g.real(0, 255)};
    const auto a = m.raw_scores(x), b = back.raw_scores(x);
    for (std::size_t k = 0; k < a.size(); ++k) ASSERT_EQ(std::memcmp(&a[k], &b[k], sizeof(double)), 0);
  }
}

TEST(Model, CorruptDocumentsRejected) {
  TempDir dir;
  pcio::write_file_atomic(dir / "m.json", "{\"format\": \"other\"}");
  EXPECT_EQ(kind_of([&] { GbmModel::load(dir / "m.json"); }), ErrorKind::Format);
  pcio::write_file_atomic(dir / "m.json", "{oops");
  EXPECT_EQ(kind_of([&] { GbmModel::load(dir / "m.json"); }), ErrorKind::Parse);
}

TEST(Training, DeterministicGivenInputs) {
  Gen g(7);
  const auto ds = noisy(g, 250);
  GbmHyperparams hp;
  hp.max_depth = 2;
  hp.n_estimators = 20;
  hp.seed = 99;
  EXPECT_EQ(train(ds, {}, hp).model.to_json(), train(ds, {}, hp).model.to_json());
}

TEST(Split, StratifiedAndDeterministic) {
  for (auto seed : testsupport::seeds(10, 13)) {
    Gen g(seed);
    std::vector<Label> y;
    const auto n = g.integer(10, 400);
    for (long long i = 0; i < n; ++i) y.push_back(static_cast<Label>(g.integer(0, 2)));
    const double f = g.real(0.1, 1.0);
    const auto s = stratified_split(y, f, seed);
    ASSERT_EQ(s.train.size() + s.test.size(), y.size());
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    ASSERT_EQ(all.size(), y.size());
    for (auto l : {Label::Green, Label::Yellow, Label::Trunk}) {
      const auto total = std::count(y.begin(), y.end(), l);
      const auto in_train = std::count_if(s.train.begin(), s.train.end(), [&](std::size_t i) { return y[i] == l; });
      ASSERT_EQ(in_train, std::llround(f * static_cast<double>(total)));
    }
    const auto again = stratified_split(y, f, seed);
    ASSERT_EQ(again.train, s.train);
  }
}

TEST(Sweep, GridShapes) {
  const auto grid = standard_grid(0);
  EXPECT_EQ(grid.size(), 45u);
  EXPECT_NE(std::find_if(grid.begin(), grid.end(),
                         [](const GbmHyperparams& h) {
                           return h.learning_rate == 0.1 && h.max_depth == 1 && h.n_estimators == 100;
                         }),
            grid.end());
  const std::vector<double> lr{0.1};
  const std::vector<int> d{1};
  const std::vector<int> n{100};
  EXPECT_EQ(make_grid(lr, d, n, 0).size(), 1u);
}

TEST(Sweep, SingleCellAndFailingCellContinues) {
  Gen g(8);
  const auto ds = separable(g, 120);
  GbmHyperparams ok;
  ok.n_estimators = 10;
  GbmHyperparams bad = ok;
  bad.max_depth = 0;
  const std::vector<GbmHyperparams> one{ok};
  const auto r1 = sweep(ds, {}, one);
  ASSERT_EQ(r1.rows.size(), 1u);
  EXPECT_EQ(r1.best, std::optional<std::size_t>(0));
  const std::vector<GbmHyperparams> two{bad, ok};
  const auto r2 = sweep(ds, {}, two);
  ASSERT_EQ(r2.rows.size(), 2u);
  EXPECT_FALSE(r2.rows[0].error.empty());
  EXPECT_FALSE(r2.rows[0].test_accuracy.has_value());
  EXPECT_TRUE(r2.rows[1].test_accuracy.has_value());
  EXPECT_EQ(r2.best, std::optional<std::size_t>(1));
  const auto csv = format_sweep_csv(r2);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "learning_rate,max_depth,n_estimators,seed,train_accuracy,test_accuracy,selected,error");
  EXPECT_EQ(sweep_to_json(r2)["best"], 1);
}

TEST(Sweep, DeeperTreesFitTrainingDataBetter) {
  Gen g(9);
  const auto ds = noisy(g, 400);
  const std::vector<double> lr{0.5};
  const std::vector<int> depths{1, 5};
  const std::vector<int> n{200};
  const auto r = sweep(ds, {}, make_grid(lr, depths, n, 0));
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_GT(*r.rows[1].train_accuracy, *r.rows[0].train_accuracy + 0.05);
  EXPECT_LE(*r.rows[1].test_accuracy, *r.rows[1].train_accuracy);
}

namespace {

const GbmModel& synthetic_model() {
  static const GbmModel model = [] {
    synth::SynthTreeSpec spec;
    spec.yellow_fraction = 0.5;
    spec.trunk_fraction = 0.2;
    spec.seed = 31;
    return train(synth::gen_label_dataset(spec, 150), {}, {}).model;
  }();
  return model;
}

double fraction(const std::vector<Label>& labels, Label l) {
  return static_cast<double>(std::count(labels.begin(), labels.end(), l)) / static_cast<double>(labels.size());
}

}  // namespace

TEST(ClassifyGbm, HalfYellowCloud) {
  synth::SynthTreeSpec spec;
  spec.point_count = 5000;
  spec.trunk_fraction = 0.0;
  spec.yellow_fraction = 0.5;
  spec.seed = 40;
  const auto t = synth::gen_tree(spec);
  const auto c = classify_gbm(t.cloud, synthetic_model());
  EXPECT_NEAR(fraction(c.labels, Label::Yellow), 0.5, 0.02);
  EXPECT_EQ(c.labels, classify_gbm(t.cloud, synthetic_model()).labels);
}

TEST(ClassifyGbm, PureTrunkCloud) {
  synth::SynthTreeSpec spec;
  spec.point_count = 3000;
  spec.trunk_fraction = 1.0;
  spec.seed = 41;
  const auto t = synth::gen_tree(spec);
  const auto c = classify_gbm(t.cloud, synthetic_model());
  EXPECT_GE(fraction(c.labels, Label::Trunk), 0.95);
  for (auto l : c.labels) ASSERT_NE(l, Label::Unassigned);
}

TEST(ClassifyGbm, Errors) {
  EXPECT_EQ(kind_of([] { classify_gbm({}, synthetic_model()); }), ErrorKind::EmptyInput);
  ColoredPointCloud c;
  c.points.push_back({});
  EXPECT_EQ(kind_of([&] { classify_gbm(c, GbmModel{}); }), ErrorKind::Validation);
}

TEST(ClassifyGbm, MatchesPerPointPrediction) {
  synth::SynthTreeSpec spec;
  spec.point_count = 4000;
  spec.yellow_fraction = 0.3;
  spec.seed = 42;
  const auto t = synth::gen_tree(spec);
  for (const auto* model : {&synthetic_model()}) {
    const auto X = features::featurize(t.cloud, model->schema());
    const auto c = classify_gbm(t.cloud, *model);
    for (std::size_t i = 0; i < t.cloud.size(); ++i) ASSERT_EQ(c.labels[i], model->predict_label(X.row(i)));
  }
  synth::SynthTreeSpec label_spec;
  label_spec.point_count = 3000;
  label_spec.yellow_fraction = 0.5;
  label_spec.trunk_fraction = 0.2;
  GbmHyperparams hp;
  hp.n_estimators = 20;
  const auto eigen_model = train(synth::gen_label_dataset(label_spec, 60), features::FeatureSchema::with_eigen(), hp).model;
  const auto X = features::featurize(t.cloud, eigen_model.schema());
  const auto c = classify_gbm(t.cloud, eigen_model);
  for (std::size_t i = 0; i < t.cloud.size(); ++i) ASSERT_EQ(c.labels[i], eigen_model.predict_label(X.row(i)));
}
