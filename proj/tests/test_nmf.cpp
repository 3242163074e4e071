#include <gtest/gtest.h>

#include <sstream>

#include "rolespace/nmf.hpp"
#include "rolespace/rng.hpp"

using namespace rolespace;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = uniform01(rng);
  return m;
}

/// Leading left singular vector by power iteration on M M^T.
VectorXd power_iteration(const MatrixXd& M) {
  VectorXd u = VectorXd::Ones(M.rows()).normalized();
  for (int i = 0; i < 2000; ++i) u = (M * (M.transpose() * u)).normalized();
  return u;
}

}  // namespace

TEST(Nndsvd, DiagonalTwoByTwo) {
  MatrixXd M(2, 2);
  M << 2, 0, 0, 1;
  auto f = nndsvd_init(M, 1);
  // leading singular triple by hand: sigma 2, u = v = e_0
  EXPECT_NEAR(f.W(0, 0), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(f.W(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(f.H(0, 0), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(f.H(0, 1), 0.0, 1e-12);
  MatrixXd expected(2, 2);
  expected << 2, 0, 0, 0;
  EXPECT_TRUE((f.W * f.H).isApprox(expected, 1e-12));
}

TEST(Nndsvd, LeadingFactorMatchesPowerIteration) {
  MatrixXd M = random_matrix(12, 9, 3);
  auto f = nndsvd_init(M, 4);
  VectorXd u = power_iteration(M);
  const double sigma = (M.transpose() * u).norm();
  EXPECT_TRUE(f.W.col(0).isApprox(std::sqrt(sigma) * u.cwiseAbs(), 1e-8));
  EXPECT_TRUE((f.W.array() >= 0).all());
  EXPECT_TRUE((f.H.array() >= 0).all());
}

TEST(Nndsvd, RejectsDegenerateInput) {
  EXPECT_THROW(nndsvd_init(MatrixXd::Zero(3, 3), 1), std::invalid_argument);
  EXPECT_THROW(nndsvd_init(random_matrix(3, 2, 1), 3), std::invalid_argument);
  EXPECT_THROW(nndsvd_init(random_matrix(3, 2, 1), 0), std::invalid_argument);
  MatrixXd neg = random_matrix(3, 3, 1);
  neg(1, 1) = -1;
  EXPECT_THROW(nndsvd_init(neg, 1), std::invalid_argument);
}

TEST(Nndsvd, BitwiseDeterministic) {
  MatrixXd M = random_matrix(30, 20, 5);
  auto a = nndsvd_init(M, 6), b = nndsvd_init(M, 6);
  EXPECT_TRUE(a.W == b.W);
  EXPECT_TRUE(a.H == b.H);
}

TEST(Nmf, RankOneRecovery) {
  VectorXd w = VectorXd::LinSpaced(15, 0.5, 3.0);
  VectorXd h = VectorXd::LinSpaced(8, 1.0, 2.0);
  MatrixXd M = w * h.transpose();
  NmfOptions o;
  o.rank = 1;
  auto model = fit_nmf(M, o);
  EXPECT_LE((M - model.W * model.H).norm() / M.norm(), 1e-6);
}

TEST(Nmf, OvercompleteExactFit) {
  MatrixXd M = random_matrix(10, 4, 8);
  for (Eigen::Index i = 0; i < M.rows(); ++i) M.row(i).normalize();
  NmfOptions o;
  o.rank = 4;
  o.max_iter = 2000;
  o.tol = 0.0;
  auto model = fit_nmf(M, o);
  EXPECT_LE(model.objective.back(), 1e-8);
}

TEST(Nmf, ZeroIterationsReturnsInit) {
  MatrixXd M = random_matrix(6, 5, 9);
  NmfOptions o;
  o.rank = 2;
  o.max_iter = 0;
  o.tol = 0.0;
  auto init = nndsvd_init(M, 2);
  auto model = fit_nmf(M, o);
  EXPECT_TRUE(model.W == init.W);
  EXPECT_TRUE(model.H == init.H);
  EXPECT_EQ(model.objective.size(), 1u);
}

TEST(Nmf, ObjectiveNonIncreasingAndNonNegative) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    MatrixXd M = random_matrix(25 + static_cast<int>(seed), 14, seed + 100);
    NmfOptions o;
    o.rank = 2 + static_cast<int>(seed % 5);
    o.max_iter = 60;
    auto model = fit_nmf(M, o);
    for (std::size_t i = 1; i < model.objective.size(); ++i) EXPECT_LE(model.objective[i], model.objective[i - 1]);
    EXPECT_TRUE((model.W.array() >= 0).all());
    EXPECT_TRUE((model.H.array() >= 0).all());
  }
}

TEST(Nmf, RejectsNonFinite) {
  MatrixXd M = random_matrix(4, 4, 2);
  M(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fit_nmf(M, NmfOptions{}), std::invalid_argument);
}

TEST(Discretize, ArgmaxWithLowestIndexTies) {
  MatrixXd W(3, 2);
  W << 0.1, 0.9, 0.5, 0.5, 0.0, 0.0;
  std::vector<UserId> users = {"a", "b", "c"};
  auto a = discretize(W, users);
  EXPECT_EQ(a.cluster, (std::vector<int>{1, 0, 0}));
  EXPECT_EQ(a.users.size(), 3u);
  ASSERT_EQ(a.warnings.size(), 1u);
  EXPECT_NE(a.warnings[0].find("c"), std::string::npos);
}

TEST(Discretize, ScalingInvariance) {
  MatrixXd W = random_matrix(40, 5, 12);
  std::vector<UserId> users;
  for (int i = 0; i < 40; ++i) users.push_back(std::to_string(i));
  MatrixXd scaled = W;
  Rng rng(1);
  for (Eigen::Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= 0.01 + 100 * uniform01(rng);
  EXPECT_EQ(discretize(W, users).cluster, discretize(scaled, users).cluster);
}

TEST(Profiles, FiltersAndNormalizes) {
  std::vector<RoleMixture> m = {{"short", 0, {1, 0}}, {"short", 1, {1, 0}}, {"short", 2, {0, 1}},
                                {"long", 0, {0.6, 0.4}}, {"long", 1, {0.5, 0.5}}, {"long", 2, {0.2, 0.8}},
                                {"long", 4, {1, 0}}};
  auto b = build_profile_matrix(m, 4, 5, 2);
  ASSERT_EQ(b.matrix.users, std::vector<UserId>{"long"});
  EXPECT_NEAR(b.matrix.values.row(0).norm(), 1.0, 1e-12);
  // quarter-major: column t*K + k; quarter 3 is zero-filled
  EXPECT_EQ(b.matrix.values(0, 6), 0.0);
  EXPECT_EQ(b.matrix.values(0, 7), 0.0);
  EXPECT_NEAR(b.matrix.values(0, 8) / b.matrix.values(0, 0), 1.0 / 0.6, 1e-12);
}

TEST(Profiles, SingleQuarterUnitRow) {
  std::vector<RoleMixture> m = {{"u", 0, {1, 0, 0}}};
  auto b = build_profile_matrix(m, 1, 2, 3);
  ASSERT_EQ(b.matrix.values.rows(), 1);
  VectorXd e0 = VectorXd::Zero(6);
  e0[0] = 1;
  EXPECT_TRUE(b.matrix.values.row(0).transpose() == e0);
}

TEST(Profiles, CsvRoundTrip) {
  std::vector<RoleMixture> m = {{"a", 0, {0.3, 0.7}}, {"b", 1, {0.9, 0.1}}};
  auto b = build_profile_matrix(m, 1, 2, 2);
  std::stringstream s;
  write_profile_csv(s, b.matrix);
  auto back = read_profile_csv(s, 2, 2);
  EXPECT_EQ(back.users, b.matrix.users);
  EXPECT_TRUE(back.values == b.matrix.values);
}

TEST(ClusterSummary, LifespanStatistics) {
  ClusterAssignment a;
  a.users = {"x", "y", "z"};
  a.cluster = {0, 0, 1};
  a.clusters = 3;
  std::vector<ActivityRecord> records;
  for (int q = 0; q < 4; ++q) records.push_back({"x", q, {1}});
  for (int q = 2; q < 8; ++q) records.push_back({"y", q, {1}});
  for (int q = 5; q < 7; ++q) records.push_back({"z", q, {1}});
  std::vector<RoleMixture> mixtures = {{"x", 0, {0.9, 0.1}}, {"y", 2, {0.1, 0.9}}, {"z", 5, {0.95, 0.05}}};
  auto s = cluster_summary(a, records, mixtures, 0.15);
  ASSERT_EQ(s.size(), 2u);  // empty cluster 2 omitted
  EXPECT_EQ(s[0].editors, 2u);
  EXPECT_EQ(s[0].min_active, 4);
  EXPECT_EQ(s[0].max_active, 6);
  EXPECT_DOUBLE_EQ(s[0].median_active, 5.0);
  EXPECT_DOUBLE_EQ(s[0].mean_active, 5.0);
  EXPECT_NEAR(s[0].fraction, 2.0 / 3, 1e-15);
  EXPECT_EQ(s[0].dominant_roles, (std::vector<int>{0, 1}));
  // singleton
  EXPECT_EQ(s[1].min_active, 2);
  EXPECT_EQ(s[1].max_active, 2);
  EXPECT_DOUBLE_EQ(s[1].median_active, 2.0);
  EXPECT_DOUBLE_EQ(s[1].mean_active, 2.0);
  EXPECT_EQ(s[1].dominant_roles, std::vector<int>{0});
  EXPECT_EQ(s[1].dominant_first_quarter, 5);
  EXPECT_EQ(s[1].dominant_last_quarter, 6);
}
