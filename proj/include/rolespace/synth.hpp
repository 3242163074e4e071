#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rolespace/dtm.hpp"
#include "rolespace/ingest.hpp"

namespace rolespace {

/// K x V role matrix with disjoint term blocks; each role puts `leakage` of its
/// mass uniformly on terms outside its block. Requires V >= K.
Eigen::MatrixXd planted_roles(int roles, int terms, double leakage);

struct SynthConfig {
  int users = 2000;
  int quarters = 12;
  /// K x V planted roles; planted_roles(7, 28, 0.02) when empty.
  Eigen::MatrixXd roles;
  /// Optional per-quarter role matrices overriding `roles` and the drift.
  std::vector<Eigen::MatrixXd> role_schedule;
  /// Variance of the Gaussian random walk on log role weights between quarters.
  double drift_sigma2 = 0.0;

  /// A user's quarter mixture is Dirichlet with `dominant_concentration` on
  /// the current dominant role and `background_concentration` elsewhere.
  double dominant_concentration = 20.0;
  double background_concentration = 0.2;
  /// Per-quarter probability of moving the dominant role to another role,
  /// drawn per user: `volatile_switch` for a `volatile_share` of users, else `stable_switch`.
  double stable_switch = 0.05;
  double volatile_switch = 0.5;
  double volatile_share = 0.3;

  /// Edits per active quarter: gamma-Poisson with this mean and gamma shape, at least 1.
  double edits_mean = 30.0;
  double edits_dispersion = 2.0;

  /// Users join uniformly in quarters [0, join_quarters).
  int join_quarters = 6;
  /// Departure probability after each active quarter:
  /// sigmoid(logit(base_hazard) + hazard_shift_coupling * |theta_q - theta_{q-1}|_1).
  double base_hazard = 0.15;
  double hazard_shift_coupling = 0.0;

  Date epoch = Date{std::chrono::year{2001}, std::chrono::month{1}, std::chrono::day{1}};
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument naming the violated invariant.
  void validate() const;
  int topics() const;
  int terms() const;
};

struct UserTruth {
  UserId user;
  double switch_probability = 0.0;
  int join_quarter = 0;
  int last_quarter = 0;
  /// Per active quarter, from join_quarter to last_quarter.
  std::vector<int> dominant;
  std::vector<std::vector<double>> theta;
  std::vector<double> hazard;
};

struct GroundTruth {
  /// Planted K x V roles per quarter.
  std::vector<Eigen::MatrixXd> beta;
  std::vector<UserTruth> users;
};

struct Population {
  std::vector<EditEvent> events;  // sorted by (timestamp, user, namespace)
  GroundTruth truth;
};

Population generate_population(const SynthConfig& config);

/// Writes the `user<TAB>timestamp<TAB>namespace` event format read by parse_events.
void write_events_tsv(std::ostream& out, const std::vector<EditEvent>& events, const Vocabulary& vocabulary,
                      Date epoch);

nlohmann::ordered_json truth_to_json(const GroundTruth& truth);

struct RecoveryReport {
  /// fitted topic k is matched with planted role matching[k]
  std::vector<int> matching;
  /// cosine of each matched pair averaged over slices
  std::vector<double> topic_cosine;
  /// mean matched cosine per slice
  std::vector<double> slice_cosine;
  double mean_cosine = 0.0;
  /// mean L1 change between consecutive slices, planted and fitted
  std::vector<double> planted_drift;
  std::vector<double> fitted_drift;
};

/// Hungarian matching of fitted topics to planted roles on slice-averaged
/// cosine similarity, over the slices both cover.
RecoveryReport evaluate_recovery(const DtmModel& model, const GroundTruth& truth);
RecoveryReport evaluate_recovery(std::span<const Eigen::MatrixXd> fitted, std::span<const Eigen::MatrixXd> planted);

nlohmann::ordered_json to_json(const RecoveryReport& report);

}  // namespace rolespace
