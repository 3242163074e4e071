#include "rolespace/nmf.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <istream>
#include <json.hpp>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

#include "rolespace/csv.hpp"

namespace rolespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ProfileBuild build_profile_matrix(std::span<const RoleMixture> mixtures, int min_active_quarters,
                                  int quarters, int roles) {
  if (quarters < 1 || roles < 1) throw std::invalid_argument("profile matrix: quarters and roles must be >= 1");
  std::map<UserId, std::map<int, const RoleMixture*>> by_user;
  for (const auto& m : mixtures) {
    if (m.quarter < 0 || m.quarter >= quarters)
      throw std::invalid_argument("profile matrix: mixture quarter " + std::to_string(m.quarter) +
                                  " outside [0, " + std::to_string(quarters) + ")");
    if (static_cast<int>(m.theta.size()) != roles)
      throw std::invalid_argument("profile matrix: mixture width differs from role count");
    by_user[m.user][m.quarter] = &m;
  }

  ProfileBuild build;
  auto& pm = build.matrix;
  pm.quarters = quarters;
  pm.roles = roles;
  std::vector<VectorXd> rows;
  for (const auto& [user, per_quarter] : by_user) {
    if (static_cast<int>(per_quarter.size()) < min_active_quarters) continue;
    VectorXd row = VectorXd::Zero(static_cast<Eigen::Index>(quarters) * roles);
    for (const auto& [q, m] : per_quarter)
      for (int k = 0; k < roles; ++k) row[q * roles + k] = m->theta[static_cast<std::size_t>(k)];
    const double norm = row.norm();
    if (!(norm > 0.0)) {
      build.warnings.push_back("user " + user + " has an all-zero trajectory; excluded");
      continue;
    }
    pm.users.push_back(user);
    rows.push_back(row / norm);
  }
  pm.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(quarters) * roles);
  for (std::size_t i = 0; i < rows.size(); ++i) pm.values.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return build;
}

namespace {

void require_nonnegative_finite(const MatrixXd& M, const char* what) {
  if (!M.allFinite()) throw std::invalid_argument(std::string(what) + ": matrix has non-finite values");
  if ((M.array() < 0.0).any()) throw std::invalid_argument(std::string(what) + ": matrix has negative values");
}

double objective(const MatrixXd& M, const MatrixXd& W, const MatrixXd& H) {
  return (M - W * H).squaredNorm();
}

double projected_norm(const MatrixXd& grad, const MatrixXd& X) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    const double g = grad.data()[i];
    if (g < 0.0 || X.data()[i] > 0.0) s += g * g;
  }
  return std::sqrt(s);
}

/// min ||V - W H||_F over H >= 0 by projected gradient; returns the number of steps taken.
int solve_nonnegative_ls(const MatrixXd& V, const MatrixXd& W, MatrixXd& H, double tol, int max_iter) {
  const MatrixXd WtV = W.transpose() * V;
  const MatrixXd WtW = W.transpose() * W;
  double alpha = 1.0;
  constexpr double shrink = 0.1;
  int steps = 0;
  for (; steps < max_iter; ++steps) {
    const MatrixXd grad = WtW * H - WtV;
    if (projected_norm(grad, H) < tol) break;
    MatrixXd Hp = H;
    bool decrease_alpha = false;
    bool accepted = false;
    for (int search = 0; search < 20; ++search) {
      MatrixXd Hn = (H - alpha * grad).cwiseMax(0.0);
      const MatrixXd d = Hn - H;
      const double gradd = grad.cwiseProduct(d).sum();
      const double dQd = (WtW * d).cwiseProduct(d).sum();
      const bool sufficient = 0.99 * gradd + 0.5 * dQd < 0.0;
      if (search == 0) decrease_alpha = !sufficient;
      if (decrease_alpha) {
        if (sufficient) {
          H = std::move(Hn);
          accepted = true;
          break;
        }
        alpha *= shrink;
      } else {
        if (!sufficient || Hp == Hn) {
          H = Hp;
          accepted = true;
          break;
        }
        alpha /= shrink;
        Hp = std::move(Hn);
      }
    }
    if (!accepted && !decrease_alpha) H = Hp;
  }
  return steps;
}

}  // namespace

NmfFactors nndsvd_init(const MatrixXd& M, int rank) {
  require_nonnegative_finite(M, "nndsvd_init");
  const auto n = M.rows(), d = M.cols();
  if (rank < 1 || rank > std::min(n, d))
    throw std::invalid_argument("nndsvd_init: rank must lie in [1, min(rows, cols)]");
  if (M.isZero(0.0)) throw std::invalid_argument("nndsvd_init: all-zero matrix has no factorization");

  Eigen::BDCSVD<MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const MatrixXd& U = svd.matrixU();
  const MatrixXd& V = svd.matrixV();
  const VectorXd& S = svd.singularValues();

  NmfFactors f{MatrixXd::Zero(n, rank), MatrixXd::Zero(rank, d)};
  f.W.col(0) = std::sqrt(S[0]) * U.col(0).cwiseAbs();
  f.H.row(0) = std::sqrt(S[0]) * V.col(0).cwiseAbs().transpose();
  for (int j = 1; j < rank; ++j) {
    const VectorXd x = U.col(j), y = V.col(j);
    const VectorXd xp = x.cwiseMax(0.0), xn = (-x).cwiseMax(0.0);
    const VectorXd yp = y.cwiseMax(0.0), yn = (-y).cwiseMax(0.0);
    const double xpn = xp.norm(), ypn = yp.norm(), xnn = xn.norm(), ynn = yn.norm();
    const double mp = xpn * ypn, mn = xnn * ynn;
    const bool positive = mp > mn;
    const double m = positive ? mp : mn;
    if (!(m > 0.0)) continue;
    const double scale = std::sqrt(S[j] * m);
    if (positive) {
      f.W.col(j) = scale * xp / xpn;
      f.H.row(j) = scale * (yp / ypn).transpose();
    } else {
      f.W.col(j) = scale * xn / xnn;
      f.H.row(j) = scale * (yn / ynn).transpose();
    }
  }
  return f;
}

NmfModel fit_nmf(const MatrixXd& M, const NmfOptions& options, const std::optional<NmfFactors>& init) {
  if (!M.allFinite()) throw std::invalid_argument("fit_nmf: matrix has non-finite values");
  require_nonnegative_finite(M, "fit_nmf");
  if (options.max_iter < 0 || options.inner_max_iter < 1 || !(options.tol >= 0.0) || !(options.inner_tol > 0.0))
    throw std::invalid_argument("fit_nmf: invalid options");
  NmfFactors start = init ? *init : nndsvd_init(M, options.rank);
  if (start.W.rows() != M.rows() || start.H.cols() != M.cols() || start.W.cols() != start.H.rows())
    throw std::invalid_argument("fit_nmf: initial factors do not match the matrix");
  require_nonnegative_finite(start.W, "fit_nmf initial W");
  require_nonnegative_finite(start.H, "fit_nmf initial H");

  NmfModel model{std::move(start.W), std::move(start.H), {}};
  MatrixXd& W = model.W;
  MatrixXd& H = model.H;
  double current = objective(M, W, H);
  model.objective.push_back(current);

  const MatrixXd gradW = W * (H * H.transpose()) - M * H.transpose();
  const MatrixXd gradH = (W.transpose() * W) * H - W.transpose() * M;
  const double initial_grad = std::sqrt(gradW.squaredNorm() + gradH.squaredNorm());
  double tolW = options.inner_tol * initial_grad;
  double tolH = tolW;
  const MatrixXd Mt = M.transpose();

  for (int iter = 0; iter < options.max_iter && current > 0.0; ++iter) {
    const MatrixXd W_prev = W, H_prev = H;
    MatrixXd Wt = W.transpose();
    const int stepsW = solve_nonnegative_ls(Mt, H.transpose(), Wt, tolW, options.inner_max_iter);
    W = Wt.transpose();
    if (stepsW == 0) tolW *= 0.1;
    const int stepsH = solve_nonnegative_ls(M, W, H, tolH, options.inner_max_iter);
    if (stepsH == 0) tolH *= 0.1;

    const double next = objective(M, W, H);
    if (next > current) {
      // rounding can undo a vanishing Armijo decrease; keep the better factors
      W = W_prev;
      H = H_prev;
      break;
    }
    model.objective.push_back(next);
    const bool moved = stepsW > 0 || stepsH > 0;
    const double decrease = current - next;
    current = next;
    if (moved && decrease < options.tol * model.objective[model.objective.size() - 2]) break;
  }
  return model;
}

ClusterAssignment discretize(const MatrixXd& W, std::span<const UserId> users) {
  if (static_cast<std::size_t>(W.rows()) != users.size())
    throw std::invalid_argument("discretize: one user id per coefficient row required");
  ClusterAssignment a;
  a.clusters = static_cast<int>(W.cols());
  a.users.assign(users.begin(), users.end());
  a.cluster.resize(users.size());
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    int best = 0;
    for (Eigen::Index k = 1; k < W.cols(); ++k)
      if (W(i, k) > W(i, best)) best = static_cast<int>(k);
    if (W.cols() == 0 || !(W(i, best) > 0.0))
      a.warnings.push_back("user " + users[static_cast<std::size_t>(i)] + " has an all-zero coefficient row; assigned to cluster 0");
    a.cluster[static_cast<std::size_t>(i)] = best;
  }
  return a;
}

std::vector<ClusterSummary> cluster_summary(const ClusterAssignment& assignment,
                                            std::span<const ActivityRecord> records,
                                            std::span<const RoleMixture> mixtures,
                                            double dominant_threshold) {
  std::map<UserId, std::set<int>> active;
  for (const auto& r : records) active[r.user].insert(r.quarter);
  std::map<UserId, std::vector<const RoleMixture*>> user_mixtures;
  std::size_t K = 0;
  for (const auto& m : mixtures) {
    user_mixtures[m.user].push_back(&m);
    K = std::max(K, m.theta.size());
  }

  const std::size_t n = assignment.users.size();
  std::vector<ClusterSummary> out;
  for (int c = 0; c < assignment.clusters; ++c) {
    std::vector<int> lifespans;
    std::map<int, std::size_t> quarter_members;
    std::vector<double> poap_sum(K, 0.0);
    std::size_t poap_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (assignment.cluster[i] != c) continue;
      const auto& user = assignment.users[i];
      auto it = active.find(user);
      if (it == active.end()) throw std::invalid_argument("cluster_summary: no records for user " + user);
      lifespans.push_back(static_cast<int>(it->second.size()));
      for (int q : it->second) ++quarter_members[q];
      for (const RoleMixture* m : user_mixtures[user]) {
        for (std::size_t k = 0; k < m->theta.size(); ++k) poap_sum[k] += m->theta[k];
        ++poap_count;
      }
    }
    if (lifespans.empty()) continue;
    std::sort(lifespans.begin(), lifespans.end());
    ClusterSummary s;
    s.cluster = c;
    s.editors = lifespans.size();
    s.fraction = static_cast<double>(s.editors) / static_cast<double>(n);
    s.min_active = lifespans.front();
    s.max_active = lifespans.back();
    const std::size_t mid = lifespans.size() / 2;
    s.median_active = lifespans.size() % 2 ? lifespans[mid] : 0.5 * (lifespans[mid - 1] + lifespans[mid]);
    double total = 0.0;
    for (int l : lifespans) total += l;
    s.mean_active = total / static_cast<double>(lifespans.size());
    std::size_t peak = 0;
    for (const auto& [q, count] : quarter_members) peak = std::max(peak, count);
    s.dominant_first_quarter = -1;
    for (const auto& [q, count] : quarter_members) {
      if (2 * count < peak) continue;
      if (s.dominant_first_quarter < 0) s.dominant_first_quarter = q;
      s.dominant_last_quarter = q;
    }
    s.mean_poap.resize(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      s.mean_poap[k] = poap_count ? poap_sum[k] / static_cast<double>(poap_count) : 0.0;
      if (s.mean_poap[k] >= dominant_threshold) s.dominant_roles.push_back(static_cast<int>(k));
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_profile_csv(std::ostream& out, const ProfileMatrix& profile) {
  out << "user";
  for (int t = 0; t < profile.quarters; ++t)
    for (int k = 0; k < profile.roles; ++k) out << ",q" << t << "_r" << k;
  out << '\n';
  for (Eigen::Index i = 0; i < profile.values.rows(); ++i) {
    out << csv_field(profile.users[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < profile.values.cols(); ++j) out << ',' << format_double(profile.values(i, j));
    out << '\n';
  }
}

ProfileMatrix read_profile_csv(std::istream& in, int quarters, int roles) {
  ProfileMatrix pm;
  pm.quarters = quarters;
  pm.roles = roles;
  std::string line;
  std::getline(in, line);
  const auto width = static_cast<std::size_t>(quarters) * static_cast<std::size_t>(roles);
  if (split_csv_line(line).size() != width + 1) throw std::invalid_argument("profile CSV: header width mismatch");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != width + 1) throw std::invalid_argument("profile CSV: wrong field count");
    pm.users.push_back(f[0]);
    std::vector<double> row;
    for (std::size_t j = 1; j < f.size(); ++j) row.push_back(parse_double(f[j]));
    rows.push_back(std::move(row));
  }
  pm.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) pm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return pm;
}

namespace {

std::string join_ints(const std::vector<int>& v, const char* sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

void write_cluster_report_csv(std::ostream& out, std::span<const ClusterSummary> summary) {
  out << "cluster_id,editors,fraction,min_active,max_active,median_active,avg_active,dominant_quarters,dominant_roles\n";
  for (const auto& s : summary) {
    out << s.cluster << ',' << s.editors << ',' << format_double(s.fraction) << ',' << s.min_active << ','
        << s.max_active << ',' << format_double(s.median_active) << ',' << format_double(s.mean_active) << ','
        << s.dominant_first_quarter << '-' << s.dominant_last_quarter << ','
        << csv_field(join_ints(s.dominant_roles, " ")) << '\n';
  }
}

std::string cluster_report_json(std::span<const ClusterSummary> summary, double dominant_threshold) {
  nlohmann::ordered_json j;
  j["dominant_threshold"] = dominant_threshold;
  j["clusters"] = nlohmann::ordered_json::array();
  for (const auto& s : summary) {
    nlohmann::ordered_json c;
    c["cluster_id"] = s.cluster;
    c["editors"] = s.editors;
    c["fraction"] = s.fraction;
    c["active_quarters"] = {{"min", s.min_active}, {"max", s.max_active},
                            {"median", s.median_active}, {"avg", s.mean_active}};
    c["dominant_quarters"] = {s.dominant_first_quarter, s.dominant_last_quarter};
    c["mean_poap"] = s.mean_poap;
    c["dominant_roles"] = s.dominant_roles;
    j["clusters"].push_back(std::move(c));
  }
  return j.dump(2) + "\n";
}

}  // namespace rolespace
