#include "rolespace/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rolespace {

Metric Metric::of(double value) {
  Metric m;
  m.value_ = value;
  return m;
}

Metric Metric::undefined(std::string reason) {
  Metric m;
  m.reason_ = std::move(reason);
  return m;
}

double Metric::value() const {
  if (!value_) throw std::logic_error("metric undefined: " + reason_);
  return *value_;
}

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores and labels differ in length (" + std::to_string(scores.size()) + " vs " +
                                std::to_string(labels.size()) + ")");
  for (int y : labels)
    if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0 or 1");
}

Metric ratio(std::size_t num, std::size_t den, const char* why) {
  if (den == 0) return Metric::undefined(why);
  return Metric::of(static_cast<double>(num) / static_cast<double>(den));
}

}  // namespace

Metric roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int y : labels) pos += static_cast<std::size_t>(y);
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return Metric::undefined("single class present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the positive rank sum, kept integral: a tie group over ranks i+1..j
  // contributes (i+1+j) per member.
  long long twice_rank_sum = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const long long twice_avg = static_cast<long long>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) twice_rank_sum += twice_avg;
    i = j;
  }
  const long long twice_u = twice_rank_sum - static_cast<long long>(pos) * static_cast<long long>(pos + 1);
  return Metric::of((static_cast<double>(twice_u) / 2.0) / (static_cast<double>(pos) * static_cast<double>(neg)));
}

EvalReport confusion_metrics(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_inputs(scores, labels);
  EvalReport r;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1)
      ++(predicted ? r.counts.tp : r.counts.fn);
    else
      ++(predicted ? r.counts.fp : r.counts.tn);
  }
  const auto& c = r.counts;
  r.tp_rate = ratio(c.tp, c.tp + c.fn, "no positive instances");
  r.recall = r.tp_rate;
  r.fp_rate = ratio(c.fp, c.fp + c.tn, "no negative instances");
  r.precision = ratio(c.tp, c.tp + c.fp, "no positive predictions");
  if (!r.precision.defined())
    r.f_measure = Metric::undefined("precision undefined: " + r.precision.reason());
  else if (!r.recall.defined())
    r.f_measure = Metric::undefined("recall undefined: " + r.recall.reason());
  else if (r.precision.value() + r.recall.value() == 0.0)
    r.f_measure = Metric::of(0.0);
  else
    r.f_measure = Metric::of(2.0 * r.precision.value() * r.recall.value() / (r.precision.value() + r.recall.value()));
  r.roc_auc = roc_auc(scores, labels);
  return r;
}

std::vector<double> default_lift_fractions() {
  std::vector<double> f;
  for (int k = 1; k <= 20; ++k) f.push_back(k / 20.0);
  return f;
}

std::size_t selection_size(double fraction, std::size_t n) {
  const double x = fraction * static_cast<double>(n);
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, x)) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

LiftCurve lift_curve(std::span<const double> scores, std::span<const int> labels, std::span<const double> fractions) {
  check_inputs(scores, labels);
  LiftCurve curve;
  const std::size_t n = scores.size();
  std::size_t churners = 0;
  for (int y : labels) churners += static_cast<std::size_t>(y);
  if (churners == 0 || churners == n) {
    curve.undefined = "single class present";
    return curve;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> captured(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) captured[i + 1] = captured[i] + static_cast<std::size_t>(labels[order[i]]);
  for (double s : fractions) {
    if (!(s > 0.0 && s <= 1.0)) throw std::invalid_argument("lift fractions must lie in (0, 1]");
    const std::size_t top = std::min(selection_size(s, n), n);
    curve.points.push_back({s, static_cast<double>(captured[top]) / (static_cast<double>(churners) * s)});
  }
  return curve;
}

LiftCurve lift_curve(std::span<const double> scores, std::span<const int> labels) {
  auto f = default_lift_fractions();
  return lift_curve(scores, labels, f);
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels, double threshold) {
  EvalReport r = confusion_metrics(scores, labels, threshold);
  r.lift = lift_curve(scores, labels);
  return r;
}

EvalReport average_reports(std::span<const EvalReport> reports) {
  EvalReport out;
  auto average = [&](Metric EvalReport::*field) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : reports)
      if ((r.*field).defined()) {
        sum += (r.*field).value();
        ++n;
      }
    return n ? Metric::of(sum / static_cast<double>(n)) : Metric::undefined("undefined in every report");
  };
  for (const auto& r : reports) {
    out.counts.tp += r.counts.tp;
    out.counts.fp += r.counts.fp;
    out.counts.tn += r.counts.tn;
    out.counts.fn += r.counts.fn;
  }
  out.tp_rate = average(&EvalReport::tp_rate);
  out.fp_rate = average(&EvalReport::fp_rate);
  out.precision = average(&EvalReport::precision);
  out.recall = average(&EvalReport::recall);
  out.f_measure = average(&EvalReport::f_measure);
  out.roc_auc = average(&EvalReport::roc_auc);

  std::vector<double> lift_sum;
  std::vector<double> fractions;
  std::size_t curves = 0;
  for (const auto& r : reports) {
    if (r.lift.undefined) continue;
    if (curves == 0) {
      for (const auto& p : r.lift.points) fractions.push_back(p.fraction);
      lift_sum.assign(fractions.size(), 0.0);
    }
    if (r.lift.points.size() != fractions.size()) throw std::invalid_argument("average_reports: lift grids differ");
    for (std::size_t i = 0; i < fractions.size(); ++i) lift_sum[i] += r.lift.points[i].lift;
    ++curves;
  }
  if (curves == 0) {
    out.lift.undefined = "undefined in every report";
  } else {
    for (std::size_t i = 0; i < fractions.size(); ++i)
      out.lift.points.push_back({fractions[i], lift_sum[i] / static_cast<double>(curves)});
  }
  return out;
}

nlohmann::ordered_json to_json(const Metric& metric) {
  if (metric.defined()) return metric.value();
  return {{"undefined", metric.reason()}};
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["counts"] = {{"tp", report.counts.tp}, {"fp", report.counts.fp}, {"tn", report.counts.tn}, {"fn", report.counts.fn}};
  j["tp_rate"] = to_json(report.tp_rate);
  j["fp_rate"] = to_json(report.fp_rate);
  j["precision"] = to_json(report.precision);
  j["recall"] = to_json(report.recall);
  j["f_measure"] = to_json(report.f_measure);
  j["roc_auc"] = to_json(report.roc_auc);
  if (report.lift.undefined) {
    j["lift"] = {{"undefined", *report.lift.undefined}};
  } else {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : report.lift.points) arr.push_back({{"fraction", p.fraction}, {"lift", p.lift}});
    j["lift"] = arr;
  }
  return j;
}

}  // namespace rolespace
