#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rolespace/churn.hpp"
#include "rolespace/evaluate.hpp"

namespace rolespace {

/// Dense row-major feature matrix with binary labels (1 = Departed).
struct TrainingSet {
  std::size_t features = 0;
  std::vector<double> x;
  std::vector<int> y;
  /// Optional grouping (sliding-window index) per row; empty when ungrouped.
  std::vector<int> group;

  std::size_t size() const { return y.size(); }
  std::span<const double> row(std::size_t i) const { return {x.data() + i * features, features}; }
  TrainingSet subset(std::span<const std::size_t> rows) const;
  TrainingSet select_columns(std::span<const std::size_t> columns) const;
};

TrainingSet to_training_set(const ChurnDataset& dataset);

struct ForestConfig {
  int n_trees = 100;
  int max_depth = -1;           // negative: unlimited
  int features_per_split = 0;   // 0: round(sqrt(p))
  int min_leaf = 1;
  std::uint64_t seed = 1;
  int threads = 0;              // 0: hardware concurrency
};

struct LogisticConfig {
  double l2 = 1e-3;
  double learning_rate = 0.5;
  int max_iter = 20000;
  double tol = 1e-6;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double departed_fraction = 0.0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;
  /// 1 if the leaf majority is Departed, 0.5 on an exact tie, else 0.
  double vote(std::span<const double> x) const;
};

struct ForestParams {
  std::vector<DecisionTree> trees;
};

struct LogisticParams {
  std::vector<double> mean;
  std::vector<double> scale;    // 0 marks a constant column
  std::vector<double> weights;  // on standardized features
  double intercept = 0.0;
};

class TrainedModel {
 public:
  enum class Kind { RandomForest, Logistic };

  TrainedModel(ForestParams forest, std::size_t features);
  TrainedModel(LogisticParams logistic, std::size_t features);

  Kind kind() const;
  std::size_t feature_count() const { return features_; }
  const ForestParams* forest() const { return std::get_if<ForestParams>(&params_); }
  const LogisticParams* logistic() const { return std::get_if<LogisticParams>(&params_); }

  /// Probability of Departed; throws std::invalid_argument on a feature-count mismatch.
  double predict_proba(std::span<const double> x) const;
  std::vector<double> predict_proba(const TrainingSet& set) const;

  nlohmann::ordered_json to_json() const;
  static TrainedModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static TrainedModel load(const std::filesystem::path& path);

 private:
  std::variant<ForestParams, LogisticParams> params_;
  std::size_t features_ = 0;
};

/// Bootstrap CART trees with Gini splits over random feature subsets.
TrainedModel train_random_forest(const TrainingSet& set, const ForestConfig& config);

/// L2-regularized logistic regression on standardized features by gradient descent.
TrainedModel train_logistic(const TrainingSet& set, const LogisticConfig& config);

using Trainer = std::function<TrainedModel(const TrainingSet&, std::uint64_t seed)>;

Trainer forest_trainer(ForestConfig config);
Trainer logistic_trainer(LogisticConfig config);

/// Stratified fold ids: each class is shuffled and dealt round-robin, the deal
/// continuing from one class to the next.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

struct CrossValidation {
  std::vector<int> fold_of;
  std::vector<EvalReport> folds;
  EvalReport mean;
};

CrossValidation cross_validate(const TrainingSet& set, int folds, const Trainer& trainer, std::uint64_t seed);

struct GroupedValidation {
  std::map<int, CrossValidation> groups;
  /// Average of the per-group means.
  EvalReport mean;
  /// Groups left out because a class has fewer than two members or the group has fewer rows than folds.
  std::vector<std::string> warnings;
};

/// Cross-validation run separately inside each group (sliding window).
/// Throws std::invalid_argument when no group can be validated.
GroupedValidation cross_validate_by_group(const TrainingSet& set, int folds, const Trainer& trainer,
                                          std::uint64_t seed);

}  // namespace rolespace
