#include "rolespace/classify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "rolespace/csv.hpp"
#include "rolespace/rng.hpp"

namespace rolespace {

TrainingSet TrainingSet::subset(std::span<const std::size_t> rows) const {
  TrainingSet out;
  out.features = features;
  out.x.reserve(rows.size() * features);
  out.y.reserve(rows.size());
  for (auto r : rows) {
    auto src = row(r);
    out.x.insert(out.x.end(), src.begin(), src.end());
    out.y.push_back(y[r]);
    if (!group.empty()) out.group.push_back(group[r]);
  }
  return out;
}

TrainingSet TrainingSet::select_columns(std::span<const std::size_t> columns) const {
  for (auto c : columns)
    if (c >= features) throw std::invalid_argument("select_columns: column " + std::to_string(c) + " out of range");
  TrainingSet out;
  out.features = columns.size();
  out.y = y;
  out.group = group;
  out.x.reserve(size() * columns.size());
  for (std::size_t i = 0; i < size(); ++i)
    for (auto c : columns) out.x.push_back(x[i * features + c]);
  return out;
}

TrainingSet to_training_set(const ChurnDataset& dataset) {
  TrainingSet set;
  set.features = dataset.feature_names.size();
  for (const auto& ex : dataset.examples) {
    if (ex.features.size() != set.features) throw std::invalid_argument("to_training_set: ragged feature vectors");
    if (ex.label == ChurnLabel::Excluded) throw std::invalid_argument("to_training_set: excluded example in dataset");
    set.x.insert(set.x.end(), ex.features.begin(), ex.features.end());
    set.y.push_back(ex.label == ChurnLabel::Departed ? 1 : 0);
    set.group.push_back(ex.window);
  }
  return set;
}

double DecisionTree::vote(std::span<const double> x) const {
  int n = 0;
  while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
    const auto& node = nodes[static_cast<std::size_t>(n)];
    n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  const double f = nodes[static_cast<std::size_t>(n)].departed_fraction;
  return f > 0.5 ? 1.0 : (f == 0.5 ? 0.5 : 0.0);
}

TrainedModel::TrainedModel(ForestParams forest, std::size_t features)
    : params_(std::move(forest)), features_(features) {}
TrainedModel::TrainedModel(LogisticParams logistic, std::size_t features)
    : params_(std::move(logistic)), features_(features) {}

TrainedModel::Kind TrainedModel::kind() const {
  return std::holds_alternative<ForestParams>(params_) ? Kind::RandomForest : Kind::Logistic;
}

double TrainedModel::predict_proba(std::span<const double> x) const {
  if (x.size() != features_)
    throw std::invalid_argument("predict_proba: expected " + std::to_string(features_) + " features, got " +
                                std::to_string(x.size()));
  if (const auto* f = forest()) {
    double votes = 0.0;
    for (const auto& t : f->trees) votes += t.vote(x);
    return votes / static_cast<double>(f->trees.size());
  }
  const auto& lr = *logistic();
  double z = lr.intercept;
  for (std::size_t j = 0; j < features_; ++j)
    if (lr.scale[j] > 0.0) z += lr.weights[j] * (x[j] - lr.mean[j]) / lr.scale[j];
  return 1.0 / (1.0 + std::exp(-z));
}

std::vector<double> TrainedModel::predict_proba(const TrainingSet& set) const {
  std::vector<double> out(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) out[i] = predict_proba(set.row(i));
  return out;
}

nlohmann::ordered_json TrainedModel::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "rolespace-model";
  j["version"] = 1;
  j["features"] = features_;
  if (const auto* f = forest()) {
    j["kind"] = "random_forest";
    auto trees = nlohmann::ordered_json::array();
    for (const auto& t : f->trees) {
      auto nodes = nlohmann::ordered_json::array();
      for (const auto& n : t.nodes)
        nodes.push_back(nlohmann::ordered_json::array({n.feature, n.threshold, n.left, n.right, n.departed_fraction}));
      trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
  } else {
    const auto& lr = *logistic();
    j["kind"] = "logistic";
    j["mean"] = lr.mean;
    j["scale"] = lr.scale;
    j["weights"] = lr.weights;
    j["intercept"] = lr.intercept;
  }
  return j;
}

TrainedModel TrainedModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "rolespace-model") throw std::invalid_argument("not a rolespace model file");
  const auto features = j.at("features").get<std::size_t>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "random_forest") {
    ForestParams f;
    for (const auto& t : j.at("trees")) {
      DecisionTree tree;
      for (const auto& n : t)
        tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                              n.at(4).get<double>()});
      for (const auto& n : tree.nodes)
        if (n.feature >= static_cast<int>(features)) throw std::invalid_argument("model file: split feature out of range");
      f.trees.push_back(std::move(tree));
    }
    if (f.trees.empty()) throw std::invalid_argument("model file: forest without trees");
    return TrainedModel(std::move(f), features);
  }
  if (kind == "logistic") {
    LogisticParams lr;
    lr.mean = j.at("mean").get<std::vector<double>>();
    lr.scale = j.at("scale").get<std::vector<double>>();
    lr.weights = j.at("weights").get<std::vector<double>>();
    lr.intercept = j.at("intercept").get<double>();
    if (lr.mean.size() != features || lr.scale.size() != features || lr.weights.size() != features)
      throw std::invalid_argument("model file: logistic parameter width mismatch");
    return TrainedModel(std::move(lr), features);
  }
  throw std::invalid_argument("model file: unknown kind '" + kind + "'");
}

void TrainedModel::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json().dump(1) + "\n"); }

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  return from_json(nlohmann::json::parse(read_file(path)));
}

namespace {

void require_both_classes(const TrainingSet& set, const char* who) {
  if (set.size() == 0) throw std::invalid_argument(std::string(who) + ": empty dataset");
  std::size_t pos = 0;
  for (int y : set.y) pos += static_cast<std::size_t>(y == 1);
  if (pos == 0 || pos == set.size()) throw std::invalid_argument(std::string(who) + ": dataset has a single class");
}

void require_finite(const TrainingSet& set, const char* who) {
  for (double v : set.x)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": non-finite feature value");
}

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& set, const ForestConfig& config, int mtry, std::uint64_t seed)
      : set_(set), config_(config), mtry_(mtry), rng_(seed) {
    features_.resize(set.features);
    for (std::size_t f = 0; f < set.features; ++f) features_[f] = f;
  }

  DecisionTree build() {
    const std::size_t n = set_.size();
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = uniform_index(rng_, n);
    grow(sample, 0, n, 0);
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, int depth) {
    const std::size_t m = end - begin;
    std::size_t pos = 0;
    for (std::size_t i = begin; i < end; ++i) pos += static_cast<std::size_t>(set_.y[idx[i]]);
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    tree_.nodes.back().departed_fraction = static_cast<double>(pos) / static_cast<double>(m);

    const auto min_leaf = static_cast<std::size_t>(std::max(1, config_.min_leaf));
    if (pos == 0 || pos == m || set_.features == 0 || m < 2 * min_leaf ||
        (config_.max_depth >= 0 && depth >= config_.max_depth))
      return id;

    const double parent = impurity(pos, m);
    double best = parent - 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    for (int c = 0; c < mtry_; ++c) {
      const std::size_t pick = static_cast<std::size_t>(c) + uniform_index(rng_, features_.size() - static_cast<std::size_t>(c));
      std::swap(features_[static_cast<std::size_t>(c)], features_[pick]);
      const std::size_t f = features_[static_cast<std::size_t>(c)];
      buffer_.clear();
      for (std::size_t i = begin; i < end; ++i)
        buffer_.emplace_back(set_.x[idx[i] * set_.features + f], set_.y[idx[i]]);
      std::sort(buffer_.begin(), buffer_.end());
      std::size_t left_pos = 0;
      for (std::size_t i = 1; i < m; ++i) {
        left_pos += static_cast<std::size_t>(buffer_[i - 1].second);
        if (buffer_[i].first == buffer_[i - 1].first || i < min_leaf || m - i < min_leaf) continue;
        const double score = impurity(left_pos, i) + impurity(pos - left_pos, m - i);
        if (score < best) {
          best = score;
          best_feature = static_cast<int>(f);
          double mid = 0.5 * (buffer_[i - 1].first + buffer_[i].first);
          best_threshold = mid < buffer_[i].first ? mid : buffer_[i - 1].first;
        }
      }
    }
    if (best_feature < 0) return id;

    const auto f = static_cast<std::size_t>(best_feature);
    auto mid_it = std::partition(idx.begin() + static_cast<long>(begin), idx.begin() + static_cast<long>(end),
                                 [&](std::size_t r) { return set_.x[r * set_.features + f] <= best_threshold; });
    const auto split = static_cast<std::size_t>(mid_it - idx.begin());
    const int left = grow(idx, begin, split, depth + 1);
    const int right = grow(idx, split, end, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  /// n times the Gini impurity of a node with `pos` positives among `n`.
  static double impurity(std::size_t pos, std::size_t n) {
    const double p = static_cast<double>(pos), q = static_cast<double>(n - pos);
    return static_cast<double>(n) - (p * p + q * q) / static_cast<double>(n);
  }

  const TrainingSet& set_;
  const ForestConfig& config_;
  int mtry_;
  Rng rng_;
  DecisionTree tree_;
  std::vector<std::size_t> features_;
  std::vector<std::pair<double, int>> buffer_;
};

}  // namespace

TrainedModel train_random_forest(const TrainingSet& set, const ForestConfig& config) {
  require_both_classes(set, "train_random_forest");
  require_finite(set, "train_random_forest");
  if (config.n_trees < 1) throw std::invalid_argument("train_random_forest: n_trees must be >= 1");
  const int p = static_cast<int>(set.features);
  int mtry = config.features_per_split > 0 ? config.features_per_split
                                           : static_cast<int>(std::lround(std::sqrt(static_cast<double>(p))));
  if (p > 0 && (mtry < 1 || mtry > p))
    throw std::invalid_argument("train_random_forest: features_per_split must lie in [1, p]");
  mtry = std::clamp(mtry, std::min(1, p), p);

  ForestParams forest;
  forest.trees.resize(static_cast<std::size_t>(config.n_trees));
  auto grow_range = [&](int from, int to) {
    for (int t = from; t < to; ++t) {
      TreeBuilder builder(set, config, mtry, derive_seed(config.seed, stable_hash("tree"), static_cast<std::uint64_t>(t)));
      forest.trees[static_cast<std::size_t>(t)] = builder.build();
    }
  };
  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, config.n_trees);
  if (threads == 1) {
    grow_range(0, config.n_trees);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back(grow_range, w * config.n_trees / threads, (w + 1) * config.n_trees / threads);
    for (auto& th : pool) th.join();
  }
  return TrainedModel(std::move(forest), set.features);
}

TrainedModel train_logistic(const TrainingSet& set, const LogisticConfig& config) {
  require_both_classes(set, "train_logistic");
  require_finite(set, "train_logistic");
  const std::size_t n = set.size(), p = set.features;
  LogisticParams lr;
  lr.mean.assign(p, 0.0);
  lr.scale.assign(p, 0.0);
  lr.weights.assign(p, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) lr.mean[j] += set.x[i * p + j];
  for (auto& m : lr.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      const double d = set.x[i * p + j] - lr.mean[j];
      lr.scale[j] += d * d;
    }
  std::size_t active = 0;
  for (auto& s : lr.scale) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s < 1e-12) s = 0.0;
    else ++active;
  }
  std::vector<double> z(n * p, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (lr.scale[j] > 0.0) z[i * p + j] = (set.x[i * p + j] - lr.mean[j]) / lr.scale[j];

  // Lipschitz bound of the mean log-loss gradient on standardized columns.
  const double lipschitz = 0.25 * static_cast<double>(active + 1) + config.l2;
  const double step = std::min(config.learning_rate, 1.0 / lipschitz);
  std::vector<double> grad(p);
  for (int iter = 0; iter < config.max_iter; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = lr.intercept;
      for (std::size_t j = 0; j < p; ++j) s += lr.weights[j] * z[i * p + j];
      const double r = 1.0 / (1.0 + std::exp(-s)) - set.y[i];
      grad_b += r;
      for (std::size_t j = 0; j < p; ++j) grad[j] += r * z[i * p + j];
    }
    double norm = 0.0;
    grad_b /= static_cast<double>(n);
    norm += grad_b * grad_b;
    for (std::size_t j = 0; j < p; ++j) {
      grad[j] = lr.scale[j] > 0.0 ? grad[j] / static_cast<double>(n) + config.l2 * lr.weights[j] : 0.0;
      norm += grad[j] * grad[j];
    }
    if (std::sqrt(norm) < config.tol) break;
    lr.intercept -= step * grad_b;
    for (std::size_t j = 0; j < p; ++j) lr.weights[j] -= step * grad[j];
  }
  return TrainedModel(std::move(lr), p);
}

Trainer forest_trainer(ForestConfig config) {
  return [config](const TrainingSet& set, std::uint64_t seed) {
    ForestConfig c = config;
    c.seed = seed;
    return train_random_forest(set, c);
  };
}

Trainer logistic_trainer(LogisticConfig config) {
  return [config](const TrainingSet& set, std::uint64_t) { return train_logistic(set, config); };
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
  if (labels.size() < static_cast<std::size_t>(folds))
    throw std::invalid_argument("cross-validation: fewer instances than folds");
  Rng rng(derive_seed(seed, stable_hash("folds")));
  std::vector<int> fold_of(labels.size(), -1);
  std::size_t next = 0;
  for (int cls : {1, 0}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    shuffle_in_place(members, rng);
    for (auto i : members) fold_of[i] = static_cast<int>(next++ % static_cast<std::size_t>(folds));
  }
  return fold_of;
}

CrossValidation cross_validate(const TrainingSet& set, int folds, const Trainer& trainer, std::uint64_t seed) {
  CrossValidation cv;
  cv.fold_of = stratified_folds(set.y, folds, seed);
  for (int f = 0; f < folds; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < set.size(); ++i) (cv.fold_of[i] == f ? test_rows : train_rows).push_back(i);
    const TrainingSet train = set.subset(train_rows);
    const TrainingSet test = set.subset(test_rows);
    const TrainedModel model = trainer(train, derive_seed(seed, stable_hash("fold-model"), static_cast<std::uint64_t>(f)));
    const auto scores = model.predict_proba(test);
    cv.folds.push_back(evaluate(scores, test.y));
  }
  cv.mean = average_reports(cv.folds);
  return cv;
}

GroupedValidation cross_validate_by_group(const TrainingSet& set, int folds, const Trainer& trainer,
                                          std::uint64_t seed) {
  if (set.group.size() != set.size()) throw std::invalid_argument("cross_validate_by_group: rows lack group ids");
  std::map<int, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < set.size(); ++i) rows[set.group[i]].push_back(i);
  GroupedValidation gv;
  std::vector<EvalReport> means;
  for (const auto& [g, members] : rows) {
    std::size_t pos = 0;
    for (auto r : members) pos += static_cast<std::size_t>(set.y[r] == 1);
    if (members.size() < static_cast<std::size_t>(folds) || pos < 2 || members.size() - pos < 2) {
      gv.warnings.push_back("window " + std::to_string(g) + ": " + std::to_string(pos) + " churners and " +
                            std::to_string(members.size() - pos) + " non-churners, too few for " +
                            std::to_string(folds) + "-fold validation; skipped");
      continue;
    }
    auto cv = cross_validate(set.subset(members), folds, trainer, derive_seed(seed, stable_hash("group"), static_cast<std::uint64_t>(g)));
    means.push_back(cv.mean);
    gv.groups.emplace(g, std::move(cv));
  }
  if (means.empty()) throw std::invalid_argument("cross_validate_by_group: no window has enough instances of both classes");
  gv.mean = average_reports(means);
  return gv;
}

}  // namespace rolespace
