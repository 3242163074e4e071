#include "rolespace/ablation.hpp"

#include <cstdio>
#include <limits>
#include <set>
#include <stdexcept>

namespace rolespace {

const AblationEntry& AblationResult::entry(const std::string& group) const {
  for (const auto& e : entries)
    if (e.group == group) return e;
  throw std::invalid_argument("no ablation entry for group '" + group + "'");
}

std::string AblationResult::largest_auc_drop() const {
  std::string best;
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& e : entries) {
    const auto& d = e.deltas.at("roc_auc");
    if (d.defined() && d.value() < lowest) {
      lowest = d.value();
      best = e.group;
    }
  }
  return best;
}

EvalReport validate(const TrainingSet& set, int folds, const Trainer& trainer, std::uint64_t seed) {
  if (!set.group.empty()) return cross_validate_by_group(set, folds, trainer, seed).mean;
  return cross_validate(set, folds, trainer, seed).mean;
}

namespace {

Metric difference(const Metric& a, const Metric& b) {
  if (!a.defined()) return Metric::undefined("ablated: " + a.reason());
  if (!b.defined()) return Metric::undefined("full: " + b.reason());
  return Metric::of(a.value() - b.value());
}

std::string lift_key(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "lift_%.2f", fraction);
  return buf;
}

}  // namespace

std::map<std::string, Metric> metric_deltas(const EvalReport& ablated, const EvalReport& full) {
  std::map<std::string, Metric> out;
  out.emplace("tp_rate", difference(ablated.tp_rate, full.tp_rate));
  out.emplace("fp_rate", difference(ablated.fp_rate, full.fp_rate));
  out.emplace("precision", difference(ablated.precision, full.precision));
  out.emplace("recall", difference(ablated.recall, full.recall));
  out.emplace("f_measure", difference(ablated.f_measure, full.f_measure));
  out.emplace("roc_auc", difference(ablated.roc_auc, full.roc_auc));
  if (!ablated.lift.undefined && !full.lift.undefined && ablated.lift.points.size() == full.lift.points.size())
    for (std::size_t i = 0; i < full.lift.points.size(); ++i)
      out.emplace(lift_key(full.lift.points[i].fraction),
                  Metric::of(ablated.lift.points[i].lift - full.lift.points[i].lift));
  return out;
}

AblationResult ablate(const TrainingSet& set, std::span<const FeatureGroup> groups, const Trainer& trainer,
                      int folds, std::uint64_t seed) {
  std::set<std::string> names;
  for (const auto& g : groups) {
    if (!names.insert(g.name).second) throw std::invalid_argument("ablate: duplicate group '" + g.name + "'");
    for (auto c : g.columns)
      if (c >= set.features)
        throw std::invalid_argument("ablate: group '" + g.name + "' references unknown column " + std::to_string(c));
  }
  AblationResult result;
  result.full = validate(set, folds, trainer, seed);
  for (const auto& g : groups) {
    const std::set<std::size_t> removed(g.columns.begin(), g.columns.end());
    std::vector<std::size_t> kept;
    for (std::size_t c = 0; c < set.features; ++c)
      if (!removed.count(c)) kept.push_back(c);
    AblationEntry entry;
    entry.group = g.name;
    entry.report = validate(set.select_columns(kept), folds, trainer, seed);
    entry.deltas = metric_deltas(entry.report, result.full);
    result.entries.push_back(std::move(entry));
  }
  return result;
}

nlohmann::ordered_json to_json(const AblationResult& result) {
  nlohmann::ordered_json j;
  j["full"] = to_json(result.full);
  auto groups = nlohmann::ordered_json::array();
  for (const auto& e : result.entries) {
    nlohmann::ordered_json g;
    g["group"] = e.group;
    nlohmann::ordered_json d;
    for (const auto& [k, m] : e.deltas) d[k] = to_json(m);
    g["deltas"] = std::move(d);
    g["report"] = to_json(e.report);
    groups.push_back(std::move(g));
  }
  j["groups"] = std::move(groups);
  j["largest_auc_drop"] = result.largest_auc_drop();
  return j;
}

}  // namespace rolespace
