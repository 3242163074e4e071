#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rolespace/churn.hpp"
#include "rolespace/classify.hpp"
#include "rolespace/evaluate.hpp"

namespace rolespace {

struct AblationEntry {
  std::string group;
  EvalReport report;
  /// ablated minus full, keyed by metric name (tp_rate, ..., roc_auc, lift_0.10, ...)
  std::map<std::string, Metric> deltas;
};

struct AblationResult {
  EvalReport full;
  std::vector<AblationEntry> entries;

  const AblationEntry& entry(const std::string& group) const;
  /// Name of the group whose removal lowers ROC AUC the most.
  std::string largest_auc_drop() const;
};

/// Cross-validated report; runs per group (window) when the set carries group ids.
EvalReport validate(const TrainingSet& set, int folds, const Trainer& trainer, std::uint64_t seed);

/// Retrains without each group's columns under the same folds and seeds as the full model.
AblationResult ablate(const TrainingSet& set, std::span<const FeatureGroup> groups, const Trainer& trainer,
                      int folds, std::uint64_t seed);

std::map<std::string, Metric> metric_deltas(const EvalReport& ablated, const EvalReport& full);

nlohmann::ordered_json to_json(const AblationResult& result);

}  // namespace rolespace
