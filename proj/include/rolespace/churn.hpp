#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rolespace/dtm.hpp"

namespace rolespace {

struct ChurnConfig {
  int window = 4;             // w, quarters per sliding window
  int departed_horizon = 1;   // m
  int staying_horizon = 3;    // n: Staying needs activity at or after window end + n
  double delta = 0.001;       // stabilizer of the relative POAP change
  int churn_share = 1;        // class ratio churners : non-churners
  int stay_share = 2;
  /// Users with fewer active quarters up to the window end are left out of that window.
  int min_active_quarters = 4;

  void validate() const;
};

struct Window {
  int index = 0;
  int start = 0;
  int end = 0;  // inclusive

  bool operator==(const Window&) const = default;
};

/// Windows [j, j+w-1] for j = 0 .. T-w-n; later windows cannot be labeled.
std::vector<Window> enumerate_windows(int quarters, const ChurnConfig& config,
                                      std::vector<std::string>* warnings = nullptr);

enum class ChurnLabel { Departed, Staying, Excluded };

std::string_view to_string(ChurnLabel label);
ChurnLabel parse_label(std::string_view text);

/// Departed: silent after the window. Staying: active at or after end + n.
/// Excluded: next active inside (end, end + n).
ChurnLabel label_user(const std::set<int>& active_quarters, const Window& window, const ChurnConfig& config);

/// A user's role proportions keyed by active quarter.
struct UserHistory {
  UserId user;
  std::map<int, std::vector<double>> poap;

  std::set<int> active_quarters() const;
};

std::vector<UserHistory> histories_from_mixtures(std::span<const RoleMixture> mixtures);

/// Column names in feature order: 5 scalar features then mean, delta-mean and
/// delta-max blocks of `roles` columns each.
std::vector<std::string> feature_names(int roles);

struct FeatureGroup {
  std::string name;
  std::vector<std::size_t> columns;
};

/// The seven feature groups used for ablation; the two relative-change blocks form one group.
std::vector<FeatureGroup> feature_groups(int roles);

std::vector<double> compute_features(const UserHistory& history, const Window& window,
                                     const ChurnConfig& config, int quarters, int roles);

struct ChurnExample {
  UserId user;
  int window = 0;
  ChurnLabel label = ChurnLabel::Departed;
  std::vector<double> features;
};

struct ChurnDataset {
  std::vector<std::string> feature_names;
  std::vector<ChurnExample> examples;
  std::vector<std::string> warnings;
};

/// Labels every eligible (user, window) instance, drops Excluded ones and
/// down-samples each window to the configured class ratio. Per window the
/// kept counts are churn_share*u and stay_share*u with
/// u = min(churners / churn_share, stayers / stay_share) (integer division).
ChurnDataset build_dataset(std::span<const UserHistory> users, std::span<const Window> windows,
                           const ChurnConfig& config, int quarters, int roles, std::uint64_t seed);

void write_dataset_csv(std::ostream& out, const ChurnDataset& dataset);
ChurnDataset read_dataset_csv(std::istream& in);
std::string dataset_sidecar_json(const ChurnDataset& dataset, const ChurnConfig& config, int roles);

}  // namespace rolespace
