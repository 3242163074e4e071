#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "rolespace/ablation.hpp"
#include "rolespace/classify.hpp"
#include "rolespace/rng.hpp"

using namespace rolespace;

namespace {

/// Rows of `p` uniform features; label 1 when feature 0 exceeds 0.5 (or random when `signal` is false).
TrainingSet synthetic(std::size_t n, std::size_t p, bool signal, std::uint64_t seed) {
  Rng rng(seed);
  TrainingSet s;
  s.features = p;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) s.x.push_back(uniform01(rng));
    s.y.push_back(signal ? (s.x[i * p] > 0.5 ? 1 : 0) : (uniform01(rng) < 0.5 ? 1 : 0));
  }
  return s;
}

ForestConfig small_forest(std::uint64_t seed) {
  ForestConfig c;
  c.n_trees = 50;
  c.seed = seed;
  c.threads = 1;
  return c;
}

double accuracy(const TrainedModel& m, const TrainingSet& s) {
  auto p = m.predict_proba(s);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < s.size(); ++i) ok += (p[i] >= 0.5) == (s.y[i] == 1);
  return static_cast<double>(ok) / static_cast<double>(s.size());
}

}  // namespace

TEST(Forest, SeparableOneDimensional) {
  TrainingSet s;
  s.features = 1;
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const double x = uniform01(rng) * 2 - 1;
    s.x.push_back(x);
    s.y.push_back(x > 0 ? 1 : 0);
  }
  auto m = train_random_forest(s, small_forest(1));
  EXPECT_GE(accuracy(m, s), 0.99);
  for (double p : m.predict_proba(s)) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(Forest, ConflictingDuplicatesNearHalf) {
  TrainingSet s;
  s.features = 2;
  for (int i = 0; i < 40; ++i) {
    s.x.insert(s.x.end(), {0.3, 0.7});
    s.y.push_back(i % 2);
  }
  const std::vector<double> probe = {0.3, 0.7};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ForestConfig c = small_forest(seed);
    c.n_trees = 100;
    EXPECT_NEAR(train_random_forest(s, c).predict_proba(probe), 0.5, 0.15) << "seed " << seed;
  }
}

TEST(Forest, DepthZeroPredictsMajority) {
  auto s = synthetic(90, 3, true, 5);
  // force a 1:2 class ratio
  for (std::size_t i = 0; i < s.size(); ++i) s.y[i] = i % 3 == 0 ? 1 : 0;
  ForestConfig c = small_forest(3);
  c.n_trees = 1;
  c.max_depth = 0;
  auto m = train_random_forest(s, c);
  ASSERT_EQ(m.forest()->trees[0].nodes.size(), 1u);
  for (double p : m.predict_proba(s)) EXPECT_EQ(p, 0.0);
}

TEST(Forest, DeterministicAcrossThreadCounts) {
  auto s = synthetic(300, 6, true, 8);
  ForestConfig a = small_forest(4), b = small_forest(4);
  b.threads = 3;
  EXPECT_EQ(train_random_forest(s, a).to_json().dump(), train_random_forest(s, b).to_json().dump());
}

TEST(Forest, RejectsInvalidInput) {
  auto s = synthetic(20, 2, true, 1);
  auto one = s;
  std::fill(one.y.begin(), one.y.end(), 1);
  EXPECT_THROW(train_random_forest(one, small_forest(1)), std::invalid_argument);
  auto nan = s;
  nan.x[3] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(train_random_forest(nan, small_forest(1)), std::invalid_argument);
  ForestConfig c = small_forest(1);
  c.features_per_split = 3;
  EXPECT_THROW(train_random_forest(s, c), std::invalid_argument);
}

TEST(Logistic, SeparableAucOne) {
  TrainingSet s;
  s.features = 1;
  for (int i = 0; i < 100; ++i) {
    s.x.push_back(i);
    s.y.push_back(i >= 50 ? 1 : 0);
  }
  auto m = train_logistic(s, LogisticConfig{});
  EXPECT_EQ(roc_auc(m.predict_proba(s), s.y).value(), 1.0);
}

TEST(Logistic, ConstantColumnHasZeroWeight) {
  auto s = synthetic(200, 2, true, 3);
  for (std::size_t i = 0; i < s.size(); ++i) s.x[i * 2 + 1] = 4.0;
  auto m = train_logistic(s, LogisticConfig{});
  EXPECT_EQ(m.logistic()->weights[1], 0.0);
  EXPECT_EQ(m.logistic()->scale[1], 0.0);
  EXPECT_GT(m.logistic()->weights[0], 0.0);
}

TEST(Logistic, IdenticalFeaturesPredictBaseRate) {
  TrainingSet s;
  s.features = 3;
  for (int i = 0; i < 40; ++i) {
    s.x.insert(s.x.end(), {1.0, 2.0, 3.0});
    s.y.push_back(i < 10 ? 1 : 0);
  }
  LogisticConfig c;
  c.tol = 1e-10;
  auto m = train_logistic(s, c);
  EXPECT_NEAR(m.predict_proba(s.row(0)), 0.25, 1e-6);
  auto bad = s;
  bad.x[0] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(train_logistic(bad, c), std::invalid_argument);
}

TEST(Folds, SizesAndCoverage) {
  std::vector<int> y(20, 0);
  for (int i = 0; i < 8; ++i) y[i] = 1;
  auto f = stratified_folds(y, 10, 3);
  std::vector<int> size(10, 0), pos(10, 0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    ASSERT_GE(f[i], 0);
    ASSERT_LT(f[i], 10);
    ++size[f[i]];
    pos[f[i]] += y[i];
  }
  for (int k = 0; k < 10; ++k) {
    EXPECT_EQ(size[k], 2);
    // global ratio 0.4 gives 0.8 positives per fold
    EXPECT_LE(std::abs(pos[k] - 0.8), 1.0);
  }
  EXPECT_THROW(stratified_folds(y, 1, 3), std::invalid_argument);
  EXPECT_THROW(stratified_folds(std::vector<int>{1, 0}, 3, 3), std::invalid_argument);
}

TEST(CrossValidation, PerfectSignal) {
  auto s = synthetic(400, 4, true, 9);
  auto cv = cross_validate(s, 10, forest_trainer(small_forest(1)), 7);
  EXPECT_GE(cv.mean.roc_auc.value(), 0.99);
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < s.size(); ++i) seen.insert(i);
  EXPECT_EQ(cv.fold_of.size(), seen.size());
  EXPECT_EQ(cv.folds.size(), 10u);
}

TEST(CrossValidation, ShuffledLabelsNearChance) {
  auto s = synthetic(2000, 4, false, 10);
  auto cv = cross_validate(s, 10, forest_trainer(small_forest(1)), 7);
  EXPECT_GE(cv.mean.roc_auc.value(), 0.45);
  EXPECT_LE(cv.mean.roc_auc.value(), 0.55);
}

TEST(CrossValidation, Deterministic) {
  auto s = synthetic(120, 3, true, 2);
  auto a = cross_validate(s, 5, forest_trainer(small_forest(1)), 3);
  auto b = cross_validate(s, 5, forest_trainer(small_forest(1)), 3);
  EXPECT_EQ(to_json(a.mean).dump(), to_json(b.mean).dump());
}

TEST(CrossValidation, GroupedSkipsSmallGroups) {
  auto s = synthetic(200, 3, true, 2);
  for (std::size_t i = 0; i < s.size(); ++i) s.group.push_back(i < 195 ? 0 : 1);
  auto gv = cross_validate_by_group(s, 10, forest_trainer(small_forest(1)), 1);
  EXPECT_EQ(gv.groups.size(), 1u);
  EXPECT_EQ(gv.warnings.size(), 1u);
  auto tiny = synthetic(8, 3, true, 2);
  tiny.group.assign(8, 0);
  EXPECT_THROW(cross_validate_by_group(tiny, 10, forest_trainer(small_forest(1)), 1), std::invalid_argument);
}

TEST(Model, SaveLoadRoundTrip) {
  auto s = synthetic(100, 3, true, 6);
  const auto dir = std::filesystem::temp_directory_path() / "rolespace_model_test";
  std::filesystem::create_directories(dir);
  for (const auto& m : {train_random_forest(s, small_forest(2)), train_logistic(s, LogisticConfig{})}) {
    m.save(dir / "model.json");
    auto back = TrainedModel::load(dir / "model.json");
    EXPECT_EQ(back.kind(), m.kind());
    EXPECT_EQ(back.predict_proba(s), m.predict_proba(s));
    EXPECT_THROW(back.predict_proba(std::vector<double>{0.1, 0.2}), std::invalid_argument);
  }
  std::filesystem::remove_all(dir);
}

TEST(Model, RejectsForeignJson) {
  EXPECT_THROW(TrainedModel::from_json(nlohmann::json{{"format", "other"}}), std::invalid_argument);
}

TEST(Ablation, DummyGroupIsNeutral) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto base = synthetic(300, 3, true, seed);
    // noisy signal keeps AUC away from its ceiling
    Rng rng(seed + 50);
    for (auto& y : base.y)
      if (uniform01(rng) < 0.2) y = 1 - y;
    TrainingSet s;
    s.features = 4;
    s.y = base.y;
    for (std::size_t i = 0; i < base.size(); ++i) {
      auto r = base.row(i);
      s.x.insert(s.x.end(), r.begin(), r.end());
      s.x.push_back(0.0);
    }
    const std::vector<FeatureGroup> groups = {{"dummy", {3}}};
    auto res = ablate(s, groups, forest_trainer(small_forest(1)), 10, seed);
    EXPECT_LE(std::abs(res.entry("dummy").deltas.at("roc_auc").value()), 0.02) << "seed " << seed;
  }
}

TEST(Ablation, RemovingEverythingGivesChance) {
  auto s = synthetic(150, 3, true, 4);
  const std::vector<FeatureGroup> groups = {{"all", {0, 1, 2}}, {"signal", {0}}, {"noise", {1, 2}}};
  auto res = ablate(s, groups, forest_trainer(small_forest(1)), 10, 1);
  EXPECT_EQ(res.entry("all").report.roc_auc.value(), 0.5);
  EXPECT_LT(res.entry("signal").deltas.at("roc_auc").value(), res.entry("noise").deltas.at("roc_auc").value());
  auto j = to_json(res);
  EXPECT_EQ(j["groups"].size(), 3u);
  EXPECT_EQ(j["largest_auc_drop"], res.largest_auc_drop());
}

TEST(Ablation, RejectsBadGroups) {
  auto s = synthetic(50, 3, true, 4);
  const std::vector<FeatureGroup> unknown = {{"x", {3}}};
  EXPECT_THROW(ablate(s, unknown, forest_trainer(small_forest(1)), 5, 1), std::invalid_argument);
  const std::vector<FeatureGroup> dup = {{"x", {0}}, {"x", {1}}};
  EXPECT_THROW(ablate(s, dup, forest_trainer(small_forest(1)), 5, 1), std::invalid_argument);
}

TEST(TrainingSet, FromDataset) {
  ChurnDataset ds;
  ds.feature_names = {"a", "b"};
  ds.examples = {{"u", 3, ChurnLabel::Departed, {1, 2}}, {"v", 4, ChurnLabel::Staying, {3, 4}}};
  auto s = to_training_set(ds);
  EXPECT_EQ(s.y, (std::vector<int>{1, 0}));
  EXPECT_EQ(s.group, (std::vector<int>{3, 4}));
  EXPECT_EQ(s.x, (std::vector<double>{1, 2, 3, 4}));
  auto c = s.select_columns(std::vector<std::size_t>{1});
  EXPECT_EQ(c.x, (std::vector<double>{2, 4}));
  EXPECT_THROW(s.select_columns(std::vector<std::size_t>{2}), std::invalid_argument);
}
