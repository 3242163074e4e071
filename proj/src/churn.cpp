#include "rolespace/churn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <json.hpp>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "rolespace/csv.hpp"
#include "rolespace/rng.hpp"

namespace rolespace {

void ChurnConfig::validate() const {
  if (window < 1) throw std::invalid_argument("churn: window must be >= 1");
  if (departed_horizon < 1 || departed_horizon >= staying_horizon)
    throw std::invalid_argument("churn: need 1 <= departed_horizon < staying_horizon");
  if (!(delta > 0.0)) throw std::invalid_argument("churn: delta must be > 0");
  if (churn_share < 1 || stay_share < 1) throw std::invalid_argument("churn: class ratio shares must be >= 1");
  if (min_active_quarters < 0) throw std::invalid_argument("churn: min_active_quarters must be >= 0");
}

std::vector<Window> enumerate_windows(int quarters, const ChurnConfig& config, std::vector<std::string>* warnings) {
  config.validate();
  std::vector<Window> out;
  const int last_start = quarters - config.window - config.staying_horizon;
  if (last_start < 0) {
    if (warnings)
      warnings->push_back("no labelable window: " + std::to_string(quarters) + " quarters < window + staying horizon");
    return out;
  }
  for (int j = 0; j <= last_start; ++j) out.push_back({j, j, j + config.window - 1});
  return out;
}

std::string_view to_string(ChurnLabel label) {
  switch (label) {
    case ChurnLabel::Departed: return "departed";
    case ChurnLabel::Staying: return "staying";
    case ChurnLabel::Excluded: return "excluded";
  }
  return "?";
}

ChurnLabel parse_label(std::string_view text) {
  if (text == "departed") return ChurnLabel::Departed;
  if (text == "staying") return ChurnLabel::Staying;
  if (text == "excluded") return ChurnLabel::Excluded;
  throw std::invalid_argument("unknown churn label '" + std::string(text) + "'");
}

ChurnLabel label_user(const std::set<int>& active, const Window& window, const ChurnConfig& config) {
  auto first_in = active.lower_bound(window.start);
  if (first_in == active.end() || *first_in > window.end)
    throw std::invalid_argument("label_user: user inactive throughout window " + std::to_string(window.index));
  auto after = active.upper_bound(window.end);
  if (after == active.end()) return ChurnLabel::Departed;
  if (*active.rbegin() >= window.end + config.staying_horizon) return ChurnLabel::Staying;
  return ChurnLabel::Excluded;
}

std::set<int> UserHistory::active_quarters() const {
  std::set<int> s;
  for (const auto& [q, p] : poap) s.insert(q);
  return s;
}

std::vector<UserHistory> histories_from_mixtures(std::span<const RoleMixture> mixtures) {
  std::map<UserId, UserHistory> by_user;
  for (const auto& m : mixtures) {
    auto& h = by_user[m.user];
    h.user = m.user;
    h.poap[m.quarter] = m.theta;
  }
  std::vector<UserHistory> out;
  out.reserve(by_user.size());
  for (auto& [user, h] : by_user) out.push_back(std::move(h));
  return out;
}

std::vector<std::string> feature_names(int roles) {
  std::vector<std::string> names = {"first_active_quarter", "cumulative_active_quarters", "frac_active_lifespan",
                                    "frac_active_window", "diversity_entropy"};
  for (int k = 0; k < roles; ++k) names.push_back("mean_poap_" + std::to_string(k));
  for (int k = 0; k < roles; ++k) names.push_back("delta_poap_mean_" + std::to_string(k));
  for (int k = 0; k < roles; ++k) names.push_back("delta_poap_max_" + std::to_string(k));
  return names;
}

std::vector<FeatureGroup> feature_groups(int roles) {
  const auto K = static_cast<std::size_t>(roles);
  std::vector<FeatureGroup> groups = {{"first_active_quarter", {0}},
                                      {"cumulative_active_quarters", {1}},
                                      {"frac_active_lifespan", {2}},
                                      {"frac_active_window", {3}},
                                      {"diversity_entropy", {4}},
                                      {"mean_poap", {}},
                                      {"delta_poap", {}}};
  for (std::size_t k = 0; k < K; ++k) groups[5].columns.push_back(5 + k);
  for (std::size_t k = 0; k < 2 * K; ++k) groups[6].columns.push_back(5 + K + k);
  return groups;
}

std::vector<double> compute_features(const UserHistory& history, const Window& window, const ChurnConfig& config,
                                     int quarters, int roles) {
  config.validate();
  if (window.start < 0 || window.end < window.start || window.end >= quarters)
    throw std::invalid_argument("compute_features: window " + std::to_string(window.index) + " outside the data range");
  if (history.poap.empty()) throw std::invalid_argument("compute_features: user " + history.user + " has no activity");
  const auto K = static_cast<std::size_t>(roles);
  const std::vector<double> zero(K, 0.0);
  auto poap_at = [&](int q) -> const std::vector<double>& {
    auto it = history.poap.find(q);
    if (it == history.poap.end()) return zero;
    if (it->second.size() != K) throw std::invalid_argument("compute_features: POAP width differs from role count");
    return it->second;
  };

  const int first = history.poap.begin()->first;
  int cumulative = 0, in_window = 0;
  for (const auto& [q, p] : history.poap) {
    if (q <= window.end) ++cumulative;
    if (q >= window.start && q <= window.end) ++in_window;
  }
  const int w = window.end - window.start + 1;

  std::vector<double> f;
  f.reserve(5 + 3 * K);
  f.push_back(first);
  f.push_back(cumulative);
  f.push_back(static_cast<double>(cumulative) / static_cast<double>(window.end - first + 1));
  f.push_back(static_cast<double>(in_window) / static_cast<double>(w));

  double entropy_sum = 0.0;
  std::vector<double> mean(K, 0.0);
  for (int q = window.start; q <= window.end; ++q) {
    const auto& p = poap_at(q);
    double h = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      if (p[k] > 0.0) h -= p[k] * std::log(p[k]);
      mean[k] += p[k];
    }
    entropy_sum += h;
  }
  f.push_back(entropy_sum / w);
  for (double m : mean) f.push_back(m / w);

  // Relative change between consecutive window quarters; a one-quarter window
  // compares against the quarter before it.
  const int first_pair_end = w == 1 ? window.start : window.start + 1;
  std::vector<double> dmean(K, 0.0), dmax(K, -std::numeric_limits<double>::infinity());
  int pairs = 0;
  for (int q = first_pair_end; q <= window.end; ++q, ++pairs) {
    const auto& prev = poap_at(q - 1);
    const auto& cur = poap_at(q);
    for (std::size_t k = 0; k < K; ++k) {
      const double d = (cur[k] - prev[k] + config.delta) / (prev[k] + config.delta);
      dmean[k] += d;
      dmax[k] = std::max(dmax[k], d);
    }
  }
  for (double m : dmean) f.push_back(m / pairs);
  for (double m : dmax) f.push_back(m);
  return f;
}

ChurnDataset build_dataset(std::span<const UserHistory> users, std::span<const Window> windows,
                           const ChurnConfig& config, int quarters, int roles, std::uint64_t seed) {
  config.validate();
  ChurnDataset ds;
  ds.feature_names = feature_names(roles);

  std::vector<std::pair<const UserHistory*, std::set<int>>> eligible;
  for (const auto& u : users) eligible.emplace_back(&u, u.active_quarters());
  std::sort(eligible.begin(), eligible.end(),
            [](const auto& a, const auto& b) { return a.first->user < b.first->user; });

  for (const auto& window : windows) {
    if (window.end + config.staying_horizon > quarters - 1)
      throw std::invalid_argument("build_dataset: window " + std::to_string(window.index) +
                                  " has a staying horizon past the data end");
    std::vector<ChurnExample> churners, stayers;
    for (const auto& [user, active] : eligible) {
      auto it = active.lower_bound(window.start);
      if (it == active.end() || *it > window.end) continue;
      // only activity up to the window end may decide eligibility
      const auto seen = std::distance(active.begin(), active.upper_bound(window.end));
      if (seen < config.min_active_quarters) continue;
      const ChurnLabel label = label_user(active, window, config);
      if (label == ChurnLabel::Excluded) continue;
      ChurnExample ex{user->user, window.index, label, compute_features(*user, window, config, quarters, roles)};
      (label == ChurnLabel::Departed ? churners : stayers).push_back(std::move(ex));
    }
    const std::size_t units = std::min(churners.size() / static_cast<std::size_t>(config.churn_share),
                                       stayers.size() / static_cast<std::size_t>(config.stay_share));
    if (units == 0) {
      ds.warnings.push_back("window " + std::to_string(window.index) + " skipped: " + std::to_string(churners.size()) +
                            " churners, " + std::to_string(stayers.size()) + " non-churners");
      continue;
    }
    Rng rng(derive_seed(seed, stable_hash("balance"), static_cast<std::uint64_t>(window.index)));
    auto pick = [&](std::vector<ChurnExample>& pool, std::size_t keep) {
      std::vector<std::size_t> idx(pool.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      shuffle_in_place(idx, rng);
      idx.resize(keep);
      std::sort(idx.begin(), idx.end());
      std::vector<ChurnExample> kept;
      for (auto i : idx) kept.push_back(std::move(pool[i]));
      return kept;
    };
    auto c = pick(churners, units * static_cast<std::size_t>(config.churn_share));
    auto s = pick(stayers, units * static_cast<std::size_t>(config.stay_share));
    std::vector<ChurnExample> merged;
    merged.reserve(c.size() + s.size());
    std::merge(std::make_move_iterator(c.begin()), std::make_move_iterator(c.end()),
               std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()), std::back_inserter(merged),
               [](const ChurnExample& a, const ChurnExample& b) { return a.user < b.user; });
    std::move(merged.begin(), merged.end(), std::back_inserter(ds.examples));
  }
  return ds;
}

void write_dataset_csv(std::ostream& out, const ChurnDataset& dataset) {
  out << "user,window,label";
  for (const auto& name : dataset.feature_names) out << ',' << csv_field(name);
  out << '\n';
  for (const auto& ex : dataset.examples) {
    out << csv_field(ex.user) << ',' << ex.window << ',' << to_string(ex.label);
    for (double v : ex.features) out << ',' << format_double(v);
    out << '\n';
  }
}

ChurnDataset read_dataset_csv(std::istream& in) {
  ChurnDataset ds;
  std::string line;
  if (!std::getline(in, line)) return ds;
  auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "user" || header[1] != "window" || header[2] != "label")
    throw std::invalid_argument("dataset CSV: bad header");
  for (std::size_t i = 3; i < header.size(); ++i) ds.feature_names.push_back(header[i]);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size()) throw std::invalid_argument("dataset CSV: wrong field count");
    ChurnExample ex{f[0], static_cast<int>(parse_int(f[1])), parse_label(f[2]), {}};
    for (std::size_t i = 3; i < f.size(); ++i) ex.features.push_back(parse_double(f[i]));
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

std::string dataset_sidecar_json(const ChurnDataset& dataset, const ChurnConfig& config, int roles) {
  nlohmann::ordered_json j;
  j["features"] = dataset.feature_names;
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const auto& g : feature_groups(roles)) groups.push_back({{"name", g.name}, {"columns", g.columns}});
  j["groups"] = groups;
  j["entropy_log_base"] = "e";
  j["window"] = config.window;
  j["departed_horizon"] = config.departed_horizon;
  j["staying_horizon"] = config.staying_horizon;
  j["delta"] = config.delta;
  j["class_ratio"] = {config.churn_share, config.stay_share};
  j["min_active_quarters"] = config.min_active_quarters;
  j["examples"] = dataset.examples.size();
  j["warnings"] = dataset.warnings;
  return j.dump(2) + "\n";
}

}  // namespace rolespace
