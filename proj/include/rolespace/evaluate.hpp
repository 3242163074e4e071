#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace rolespace {

/// A metric value, or the reason it has no value (empty denominator).
class Metric {
 public:
  static Metric of(double value);
  static Metric undefined(std::string reason);

  bool defined() const { return value_.has_value(); }
  double value() const;
  double value_or(double fallback) const { return value_.value_or(fallback); }
  const std::string& reason() const { return reason_; }

 private:
  std::optional<double> value_;
  std::string reason_;
};

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

struct LiftPoint {
  double fraction = 0.0;
  double lift = 0.0;
};

struct LiftCurve {
  std::vector<LiftPoint> points;
  /// Set when the curve is undefined (a single class present).
  std::optional<std::string> undefined;
};

/// Positive class is Departed (label 1).
struct EvalReport {
  Confusion counts;
  Metric tp_rate = Metric::undefined("not computed");
  Metric fp_rate = Metric::undefined("not computed");
  Metric precision = Metric::undefined("not computed");
  Metric recall = Metric::undefined("not computed");
  Metric f_measure = Metric::undefined("not computed");
  Metric roc_auc = Metric::undefined("not computed");
  LiftCurve lift;
};

/// Confusion counts and rates at `threshold` (score >= threshold predicts Departed), plus ROC AUC.
EvalReport confusion_metrics(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

/// Mann-Whitney AUC with average ranks for tied scores.
Metric roc_auc(std::span<const double> scores, std::span<const int> labels);

/// 0.05, 0.10, ..., 1.0
std::vector<double> default_lift_fractions();

/// Number of top-ranked instances selected at fraction s of n: ceil(s * n),
/// with products within 1e-9 of an integer treated as that integer.
std::size_t selection_size(double fraction, std::size_t n);

/// Lift at each fraction s: (churners in the top selection_size(s, N) / all churners) / s.
/// Ranking is by descending score; ties keep input order.
LiftCurve lift_curve(std::span<const double> scores, std::span<const int> labels,
                     std::span<const double> fractions);
LiftCurve lift_curve(std::span<const double> scores, std::span<const int> labels);

/// confusion_metrics plus the default lift curve.
EvalReport evaluate(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

/// Per-metric mean over the reports where the metric is defined; counts are summed.
EvalReport average_reports(std::span<const EvalReport> reports);

nlohmann::ordered_json to_json(const Metric& metric);
nlohmann::ordered_json to_json(const EvalReport& report);

}  // namespace rolespace
