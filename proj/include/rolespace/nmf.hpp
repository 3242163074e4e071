#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rolespace/dtm.hpp"
#include "rolespace/ingest.hpp"

namespace rolespace {

/// Users x (quarters * roles) trajectories. Column t*K + k holds the user's
/// role-k proportion in global quarter t; rows have unit L2 norm.
struct ProfileMatrix {
  std::vector<UserId> users;
  int quarters = 0;
  int roles = 0;
  Eigen::MatrixXd values;
};

struct ProfileBuild {
  ProfileMatrix matrix;
  std::vector<std::string> warnings;
};

/// Users active in at least `min_active_quarters` quarters, one row each, ordered by user id.
/// Quarters without a mixture are zero-filled.
ProfileBuild build_profile_matrix(std::span<const RoleMixture> mixtures, int min_active_quarters,
                                  int quarters, int roles);

struct NmfFactors {
  Eigen::MatrixXd W;  // n x rank
  Eigen::MatrixXd H;  // rank x d
};

/// Non-negative double SVD initialization. Deterministic.
NmfFactors nndsvd_init(const Eigen::MatrixXd& M, int rank);

struct NmfOptions {
  int rank = 10;
  int max_iter = 200;
  /// Outer loop stops when the relative objective decrease falls below this.
  double tol = 1e-4;
  int inner_max_iter = 50;
  /// Subproblem projected-gradient tolerance, relative to the initial gradient norm.
  double inner_tol = 1e-4;
};

struct NmfModel {
  Eigen::MatrixXd W;
  Eigen::MatrixXd H;
  /// Squared Frobenius error of the initial factors, then after each outer iteration.
  std::vector<double> objective;
};

/// Alternating non-negative least squares, each half solved by projected
/// gradient with an Armijo step search. Uses nndsvd_init unless `init` is given.
NmfModel fit_nmf(const Eigen::MatrixXd& M, const NmfOptions& options,
                 const std::optional<NmfFactors>& init = std::nullopt);

struct ClusterAssignment {
  std::vector<UserId> users;
  std::vector<int> cluster;
  int clusters = 0;
  std::vector<std::string> warnings;
};

/// Each row goes to its largest coefficient; ties go to the lowest index.
ClusterAssignment discretize(const Eigen::MatrixXd& W, std::span<const UserId> users);

struct ClusterSummary {
  int cluster = 0;
  std::size_t editors = 0;
  double fraction = 0.0;
  int min_active = 0;
  int max_active = 0;
  double median_active = 0.0;
  double mean_active = 0.0;
  /// Global quarters where the share of active members is at least half its peak.
  int dominant_first_quarter = 0;
  int dominant_last_quarter = 0;
  std::vector<double> mean_poap;
  std::vector<int> dominant_roles;
};

/// One row per non-empty cluster. A role is dominant when the members' mean
/// proportion for it is at least `dominant_threshold`.
std::vector<ClusterSummary> cluster_summary(const ClusterAssignment& assignment,
                                            std::span<const ActivityRecord> records,
                                            std::span<const RoleMixture> mixtures,
                                            double dominant_threshold = 0.15);

void write_profile_csv(std::ostream& out, const ProfileMatrix& profile);
ProfileMatrix read_profile_csv(std::istream& in, int quarters, int roles);

void write_cluster_report_csv(std::ostream& out, std::span<const ClusterSummary> summary);
std::string cluster_report_json(std::span<const ClusterSummary> summary, double dominant_threshold);

}  // namespace rolespace
