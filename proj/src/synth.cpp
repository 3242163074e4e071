#include "rolespace/synth.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>
#include <tuple>

#include "rolespace/hungarian.hpp"
#include "rolespace/rng.hpp"

namespace rolespace {

Eigen::MatrixXd planted_roles(int roles, int terms, double leakage) {
  if (roles < 1 || terms < roles) throw std::invalid_argument("planted_roles: need 1 <= roles <= terms");
  if (!(leakage >= 0.0 && leakage < 1.0)) throw std::invalid_argument("planted_roles: leakage must lie in [0, 1)");
  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(roles, terms);
  for (int k = 0; k < roles; ++k) {
    const int lo = k * terms / roles, hi = (k + 1) * terms / roles;
    const int outside = terms - (hi - lo);
    const double spill = outside > 0 ? leakage : 0.0;
    for (int v = 0; v < terms; ++v)
      beta(k, v) = (v >= lo && v < hi) ? (1.0 - spill) / (hi - lo) : spill / outside;
  }
  return beta;
}

namespace {

void check_roles(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() < 1 || m.cols() < 1) throw std::invalid_argument(std::string(what) + " is empty");
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    if ((m.row(k).array() < 0.0).any() || !m.row(k).allFinite())
      throw std::invalid_argument(std::string(what) + ": negative or non-finite role weight");
    if (std::abs(m.row(k).sum() - 1.0) > 1e-9) throw std::invalid_argument(std::string(what) + ": role row not on the simplex");
  }
}

const Eigen::MatrixXd& default_roles() {
  static const Eigen::MatrixXd roles = planted_roles(7, 28, 0.02);
  return roles;
}

const Eigen::MatrixXd& base_roles(const SynthConfig& c) {
  if (!c.role_schedule.empty()) return c.role_schedule.front();
  return c.roles.size() ? c.roles : default_roles();
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double hazard_of(double base, double coupling, double shift) {
  if (base <= 0.0 || base >= 1.0) return base;
  return sigmoid(std::log(base / (1.0 - base)) + coupling * shift);
}

}  // namespace

int SynthConfig::topics() const { return static_cast<int>(base_roles(*this).rows()); }
int SynthConfig::terms() const { return static_cast<int>(base_roles(*this).cols()); }

void SynthConfig::validate() const {
  if (users < 1) throw std::invalid_argument("synth: users must be >= 1");
  if (quarters < 1) throw std::invalid_argument("synth: quarters must be >= 1");
  check_roles(base_roles(*this), "synth roles");
  if (!role_schedule.empty()) {
    if (static_cast<int>(role_schedule.size()) != quarters)
      throw std::invalid_argument("synth: role_schedule needs one matrix per quarter");
    for (const auto& m : role_schedule) {
      check_roles(m, "synth role_schedule");
      if (m.rows() != topics() || m.cols() != terms())
        throw std::invalid_argument("synth: role_schedule V mismatch with role distributions");
    }
  }
  if (roles.size() && !role_schedule.empty() && (roles.rows() != topics() || roles.cols() != terms()))
    throw std::invalid_argument("synth: V mismatch between roles and role_schedule");
  if (!(drift_sigma2 >= 0.0)) throw std::invalid_argument("synth: drift_sigma2 must be >= 0");
  if (!(dominant_concentration > 0.0 && background_concentration > 0.0))
    throw std::invalid_argument("synth: Dirichlet concentrations must be > 0");
  for (double p : {stable_switch, volatile_switch, volatile_share, base_hazard})
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("synth: probabilities must lie in [0, 1]");
  if (!(edits_mean > 0.0 && edits_dispersion > 0.0)) throw std::invalid_argument("synth: edit count parameters must be > 0");
  if (join_quarters < 1 || join_quarters > quarters)
    throw std::invalid_argument("synth: join_quarters must lie in [1, quarters]");
  if (!std::isfinite(hazard_shift_coupling)) throw std::invalid_argument("synth: hazard_shift_coupling must be finite");
}

Population generate_population(const SynthConfig& config) {
  config.validate();
  const int K = config.topics(), V = config.terms(), T = config.quarters;
  Population pop;
  auto& beta = pop.truth.beta;
  if (!config.role_schedule.empty()) {
    beta = config.role_schedule;
  } else {
    beta.push_back(base_roles(config));
    Rng drift_rng(derive_seed(config.seed, stable_hash("drift")));
    std::normal_distribution<double> noise(0.0, std::sqrt(config.drift_sigma2));
    for (int t = 1; t < T; ++t) {
      Eigen::MatrixXd next = beta.back();
      if (config.drift_sigma2 > 0.0) {
        for (Eigen::Index k = 0; k < K; ++k) {
          for (Eigen::Index v = 0; v < V; ++v)
            next(k, v) = next(k, v) > 0.0 ? std::log(next(k, v)) + noise(drift_rng) : -INFINITY;
          const double top = next.row(k).maxCoeff();
          next.row(k) = (next.row(k).array() - top).exp();
          next.row(k) /= next.row(k).sum();
        }
      }
      beta.push_back(std::move(next));
    }
  }
  std::vector<std::vector<std::vector<double>>> role_terms(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < K; ++k) {
      const auto& b = beta[static_cast<std::size_t>(t)];
      auto& row = role_terms[static_cast<std::size_t>(t)].emplace_back();
      for (int v = 0; v < V; ++v) row.push_back(b(k, v));
    }

  const int width = static_cast<int>(std::to_string(config.users).size());
  for (int u = 0; u < config.users; ++u) {
    Rng rng(derive_seed(config.seed, stable_hash("user"), static_cast<std::uint64_t>(u)));
    UserTruth truth;
    std::string id = std::to_string(u);
    truth.user = "u" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;
    truth.switch_probability = uniform01(rng) < config.volatile_share ? config.volatile_switch : config.stable_switch;
    truth.join_quarter = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(config.join_quarters)));
    int dominant = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(K)));
    std::vector<double> previous;
    std::vector<double> concentration(static_cast<std::size_t>(K));
    std::gamma_distribution<double> rate(config.edits_dispersion, config.edits_mean / config.edits_dispersion);
    for (int q = truth.join_quarter; q < T; ++q) {
      if (q > truth.join_quarter && K > 1 && uniform01(rng) < truth.switch_probability) {
        int next = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(K - 1)));
        dominant = next >= dominant ? next + 1 : next;
      }
      for (int k = 0; k < K; ++k)
        concentration[static_cast<std::size_t>(k)] =
            k == dominant ? config.dominant_concentration : config.background_concentration;
      auto theta = sample_dirichlet(concentration, rng);
      double shift = 0.0;
      for (std::size_t k = 0; k < previous.size(); ++k) shift += std::abs(theta[k] - previous[k]);

      std::poisson_distribution<long> count(rate(rng));
      const long edits = std::max(1L, count(rng));
      const std::int64_t from = quarter_start(config.epoch, q), to = quarter_start(config.epoch, q + 1);
      for (long e = 0; e < edits; ++e) {
        const auto k = sample_discrete(theta, rng);
        const auto v = sample_discrete(role_terms[static_cast<std::size_t>(q)][k], rng);
        const auto offset = static_cast<std::int64_t>(uniform_index(rng, static_cast<std::size_t>(to - from)));
        pop.events.push_back({truth.user, from + offset, static_cast<int>(v)});
      }
      const double h = hazard_of(config.base_hazard, config.hazard_shift_coupling, shift);
      truth.dominant.push_back(dominant);
      truth.theta.push_back(theta);
      truth.hazard.push_back(h);
      truth.last_quarter = q;
      previous = std::move(theta);
      if (uniform01(rng) < h) break;
    }
    pop.truth.users.push_back(std::move(truth));
  }
  std::sort(pop.events.begin(), pop.events.end(), [](const EditEvent& a, const EditEvent& b) {
    return std::tie(a.timestamp, a.user, a.namespace_id) < std::tie(b.timestamp, b.user, b.namespace_id);
  });
  return pop;
}

void write_events_tsv(std::ostream& out, const std::vector<EditEvent>& events, const Vocabulary& vocabulary,
                      Date epoch) {
  const std::int64_t epoch_secs = unix_seconds(epoch);
  for (const auto& e : events)
    out << e.user << '\t' << format_iso8601(epoch_secs + e.timestamp) << '\t'
        << vocabulary.name(static_cast<std::size_t>(e.namespace_id)) << '\n';
}

nlohmann::ordered_json truth_to_json(const GroundTruth& truth) {
  nlohmann::ordered_json j;
  auto slices = nlohmann::ordered_json::array();
  for (const auto& b : truth.beta) {
    auto rows = nlohmann::ordered_json::array();
    for (Eigen::Index k = 0; k < b.rows(); ++k) {
      std::vector<double> row;
      for (Eigen::Index v = 0; v < b.cols(); ++v) row.push_back(b(k, v));
      rows.push_back(row);
    }
    slices.push_back(std::move(rows));
  }
  j["beta"] = std::move(slices);
  auto users = nlohmann::ordered_json::array();
  for (const auto& u : truth.users) {
    nlohmann::ordered_json ju;
    ju["user"] = u.user;
    ju["switch_probability"] = u.switch_probability;
    ju["join_quarter"] = u.join_quarter;
    ju["last_quarter"] = u.last_quarter;
    ju["dominant"] = u.dominant;
    ju["theta"] = u.theta;
    ju["hazard"] = u.hazard;
    users.push_back(std::move(ju));
  }
  j["users"] = std::move(users);
  return j;
}

namespace {

double cosine(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  return na > 0.0 && nb > 0.0 ? a.dot(b) / (na * nb) : 0.0;
}

std::vector<double> drift_series(std::span<const Eigen::MatrixXd> beta, std::size_t slices) {
  std::vector<double> out;
  for (std::size_t t = 1; t < slices; ++t)
    out.push_back((beta[t] - beta[t - 1]).cwiseAbs().sum() / static_cast<double>(beta[t].rows()));
  return out;
}

}  // namespace

RecoveryReport evaluate_recovery(std::span<const Eigen::MatrixXd> fitted, std::span<const Eigen::MatrixXd> planted) {
  if (fitted.empty() || planted.empty()) throw std::invalid_argument("evaluate_recovery: no slices");
  const Eigen::Index K = fitted.front().rows();
  if (planted.front().rows() != K)
    throw std::invalid_argument("evaluate_recovery: K mismatch (" + std::to_string(K) + " fitted vs " +
                                std::to_string(planted.front().rows()) + " planted)");
  if (planted.front().cols() != fitted.front().cols())
    throw std::invalid_argument("evaluate_recovery: vocabulary size mismatch");
  const std::size_t T = std::min(fitted.size(), planted.size());
  std::vector<Eigen::MatrixXd> cos(T, Eigen::MatrixXd(K, K));
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(K, K);
  for (std::size_t t = 0; t < T; ++t) {
    for (Eigen::Index i = 0; i < K; ++i)
      for (Eigen::Index j = 0; j < K; ++j) cos[t](i, j) = cosine(fitted[t].row(i), planted[t].row(j));
    mean += cos[t];
  }
  mean /= static_cast<double>(T);
  RecoveryReport r;
  r.matching = hungarian_maximize(mean);
  for (Eigen::Index i = 0; i < K; ++i) {
    r.topic_cosine.push_back(mean(i, r.matching[static_cast<std::size_t>(i)]));
    r.mean_cosine += r.topic_cosine.back();
  }
  r.mean_cosine /= static_cast<double>(K);
  for (std::size_t t = 0; t < T; ++t) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < K; ++i) s += cos[t](i, r.matching[static_cast<std::size_t>(i)]);
    r.slice_cosine.push_back(s / static_cast<double>(K));
  }
  r.planted_drift = drift_series(planted, T);
  r.fitted_drift = drift_series(fitted, T);
  return r;
}

RecoveryReport evaluate_recovery(const DtmModel& model, const GroundTruth& truth) {
  std::vector<Eigen::MatrixXd> fitted;
  for (std::size_t t = 0; t < model.num_slices(); ++t) fitted.push_back(model.beta(t));
  return evaluate_recovery(fitted, truth.beta);
}

nlohmann::ordered_json to_json(const RecoveryReport& report) {
  nlohmann::ordered_json j;
  j["mean_cosine"] = report.mean_cosine;
  j["matching"] = report.matching;
  j["topic_cosine"] = report.topic_cosine;
  j["slice_cosine"] = report.slice_cosine;
  j["planted_drift"] = report.planted_drift;
  j["fitted_drift"] = report.fitted_drift;
  return j;
}

}  // namespace rolespace
