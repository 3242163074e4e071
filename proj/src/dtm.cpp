#include "rolespace/dtm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rolespace/csv.hpp"
#include "rolespace/rng.hpp"

namespace rolespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double DtmConfig::coupling() const { return std::min(coupling_scale / sigma2, coupling_cap); }

void DtmConfig::validate() const {
  if (topics < 1) throw std::invalid_argument("dtm: topics must be >= 1");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("dtm: sigma2 must be > 0");
  if (!(alpha_value() > 0.0)) throw std::invalid_argument("dtm: alpha must be > 0");
  if (!(eta > 0.0)) throw std::invalid_argument("dtm: eta must be > 0");
  if (burn_in < 0 || gibbs_iterations <= burn_in)
    throw std::invalid_argument("dtm: iterations must exceed burn_in >= 0");
  if (!(coupling_scale > 0.0) || !(coupling_cap > 0.0))
    throw std::invalid_argument("dtm: coupling_scale and coupling_cap must be > 0");
}

DtmModel::DtmModel(std::vector<MatrixXd> beta, MatrixXd alpha, DtmConfig config, Vocabulary vocabulary)
    : beta_(std::move(beta)), alpha_(std::move(alpha)), config_(std::move(config)),
      vocabulary_(std::move(vocabulary)) {
  const auto K = config_.topics;
  const auto V = static_cast<Eigen::Index>(vocabulary_.size());
  if (alpha_.rows() != static_cast<Eigen::Index>(beta_.size()) || alpha_.cols() != K)
    throw std::invalid_argument("dtm model: alpha must be T x K");
  for (const auto& b : beta_) {
    if (b.rows() != K || b.cols() != V) throw std::invalid_argument("dtm model: beta must be K x V");
    for (Eigen::Index k = 0; k < K; ++k) {
      if ((b.row(k).array() <= 0.0).any())
        throw std::invalid_argument("dtm model: beta entries must be positive");
      if (std::abs(b.row(k).sum() - 1.0) > 1e-9)
        throw std::invalid_argument("dtm model: beta rows must sum to 1");
    }
  }
}

bool DtmModel::operator==(const DtmModel& other) const {
  if (beta_.size() != other.beta_.size() || !(vocabulary_ == other.vocabulary_)) return false;
  for (std::size_t t = 0; t < beta_.size(); ++t)
    if (beta_[t] != other.beta_[t]) return false;
  return alpha_.rows() == other.alpha_.rows() && alpha_.cols() == other.alpha_.cols() &&
         alpha_ == other.alpha_;
}

namespace {

struct SliceFit {
  MatrixXd beta;                            // K x V
  std::vector<std::vector<double>> theta;   // D x K
  VectorXd topic_mass;                      // mean tokens per topic
};

/// Collapsed Gibbs sampler for one slice.
///
/// word_prior is K x V pseudo-counts, doc_prior a K-vector. When `anchor` is
/// given (K x V), initial assignments are drawn from it instead of uniformly,
/// which keeps topic k of this slice aligned with topic k of the previous one.
SliceFit sample_slice(std::span<const Document> docs, std::size_t V, const MatrixXd& word_prior,
                      const VectorXd& doc_prior, const DtmConfig& config, std::uint64_t seed,
                      const MatrixXd* anchor) {
  const int K = config.topics;
  const std::size_t D = docs.size();
  Rng rng(seed);

  std::vector<int> word;
  std::vector<std::uint32_t> owner;
  std::vector<std::int64_t> doc_len(D, 0);
  for (std::size_t d = 0; d < D; ++d) {
    for (const auto& [term, count] : docs[d].terms) {
      if (term < 0 || static_cast<std::size_t>(term) >= V)
        throw std::invalid_argument("document term id outside vocabulary for user " + docs[d].user);
      for (std::int64_t c = 0; c < count; ++c) {
        word.push_back(term);
        owner.push_back(static_cast<std::uint32_t>(d));
      }
      doc_len[d] += count;
    }
  }
  const std::size_t N = word.size();

  // V x K layouts keep the per-token loop over k contiguous.
  std::vector<double> prior_wk(V * K);
  std::vector<double> prior_sum(K, 0.0);
  for (std::size_t w = 0; w < V; ++w)
    for (int k = 0; k < K; ++k) {
      prior_wk[w * K + k] = word_prior(k, static_cast<Eigen::Index>(w));
      prior_sum[k] += prior_wk[w * K + k];
    }
  const double doc_prior_sum = doc_prior.sum();

  std::vector<int> z(N);
  std::vector<int> n_dk(D * K, 0), n_wk(V * K, 0), n_k(K, 0);
  std::vector<double> p(K);
  for (std::size_t i = 0; i < N; ++i) {
    int k;
    if (anchor) {
      for (int j = 0; j < K; ++j) p[j] = doc_prior[j] * (*anchor)(j, word[i]);
      k = static_cast<int>(sample_discrete(p, rng));
    } else {
      k = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(K)));
    }
    z[i] = k;
    ++n_dk[owner[i] * K + k];
    ++n_wk[static_cast<std::size_t>(word[i]) * K + k];
    ++n_k[k];
  }

  MatrixXd beta_acc = MatrixXd::Zero(K, static_cast<Eigen::Index>(V));
  std::vector<double> theta_acc(D * K, 0.0);
  VectorXd mass_acc = VectorXd::Zero(K);
  int samples = 0;

  for (int iter = 0; iter < config.gibbs_iterations; ++iter) {
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t d = owner[i];
      const std::size_t w = static_cast<std::size_t>(word[i]);
      int k = z[i];
      --n_dk[d * K + k];
      --n_wk[w * K + k];
      --n_k[k];
      double total = 0.0;
      for (int j = 0; j < K; ++j) {
        total += (n_dk[d * K + j] + doc_prior[j]) * (n_wk[w * K + j] + prior_wk[w * K + j]) /
                 (n_k[j] + prior_sum[j]);
        p[j] = total;
      }
      const double u = uniform01(rng) * total;
      k = 0;
      while (k < K - 1 && p[k] <= u) ++k;
      z[i] = k;
      ++n_dk[d * K + k];
      ++n_wk[w * K + k];
      ++n_k[k];
    }
    if (iter >= config.burn_in) {
      ++samples;
      for (int k = 0; k < K; ++k) {
        const double denom = n_k[k] + prior_sum[k];
        for (std::size_t w = 0; w < V; ++w)
          beta_acc(k, static_cast<Eigen::Index>(w)) += (n_wk[w * K + k] + prior_wk[w * K + k]) / denom;
        mass_acc[k] += n_k[k];
      }
      for (std::size_t d = 0; d < D; ++d) {
        const double denom = static_cast<double>(doc_len[d]) + doc_prior_sum;
        for (int k = 0; k < K; ++k) theta_acc[d * K + k] += (n_dk[d * K + k] + doc_prior[k]) / denom;
      }
    }
  }

  SliceFit fit;
  fit.beta = beta_acc / samples;
  fit.topic_mass = mass_acc / samples;
  fit.theta.assign(D, std::vector<double>(K));
  for (std::size_t d = 0; d < D; ++d)
    for (int k = 0; k < K; ++k) fit.theta[d][k] = theta_acc[d * K + k] / samples;
  return fit;
}

std::vector<RoleMixture> to_mixtures(std::span<const Document> docs, std::vector<std::vector<double>> theta) {
  std::vector<RoleMixture> out;
  out.reserve(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) out.push_back({docs[d].user, docs[d].slice, std::move(theta[d])});
  return out;
}

std::uint64_t slice_seed(const DtmConfig& config, std::size_t t) {
  return derive_seed(config.seed, stable_hash("dtm-slice"), t);
}

VectorXd mean_theta(const std::vector<std::vector<double>>& theta, int K) {
  VectorXd m = VectorXd::Zero(K);
  for (const auto& row : theta)
    for (int k = 0; k < K; ++k) m[k] += row[k];
  return m / static_cast<double>(theta.size());
}

}  // namespace

LdaFit fit_lda(std::span<const Document> docs, std::size_t vocabulary_size, const DtmConfig& config) {
  config.validate();
  if (docs.empty()) throw std::invalid_argument("fit_lda: slice has no documents");
  if (vocabulary_size == 0) throw std::invalid_argument("fit_lda: empty vocabulary");
  const int K = config.topics;
  MatrixXd word_prior = MatrixXd::Constant(K, static_cast<Eigen::Index>(vocabulary_size), config.eta);
  VectorXd doc_prior = VectorXd::Constant(K, config.alpha_value());
  auto fit = sample_slice(docs, vocabulary_size, word_prior, doc_prior, config, slice_seed(config, 0), nullptr);
  return {std::move(fit.beta), to_mixtures(docs, std::move(fit.theta))};
}

DtmFit fit_dtm(const TimeSlicedCorpus& corpus, const DtmConfig& config) {
  config.validate();
  const std::size_t T = corpus.num_slices();
  if (T == 0) throw std::invalid_argument("fit_dtm: corpus has no slices");
  const int K = config.topics;
  const std::size_t V = corpus.vocabulary.size();
  const auto Vi = static_cast<Eigen::Index>(V);
  const double kappa = config.coupling();
  const double alpha_total = config.alpha_value() * K;

  std::vector<MatrixXd> beta(T);
  MatrixXd alpha(static_cast<Eigen::Index>(T), K);
  std::vector<VectorXd> mass(T, VectorXd::Zero(K));
  std::vector<bool> observed(T, false);
  std::vector<RoleMixture> mixtures;

  const MatrixXd* previous = nullptr;
  VectorXd previous_mean;
  for (std::size_t t = 0; t < T; ++t) {
    const auto& docs = corpus.slices[t];
    const auto ti = static_cast<Eigen::Index>(t);
    if (docs.empty()) {
      // no data: carry the previous state, or the uniform prior mean before any data
      beta[t] = previous ? *previous : MatrixXd::Constant(K, Vi, 1.0 / static_cast<double>(V));
      if (previous)
        alpha.row(ti) = previous_mean.transpose();
      else
        alpha.row(ti).setConstant(1.0 / static_cast<double>(K));
      previous = &beta[t];
      previous_mean = alpha.row(ti).transpose();
      continue;
    }
    MatrixXd word_prior = MatrixXd::Constant(K, Vi, config.eta);
    VectorXd doc_prior = VectorXd::Constant(K, config.alpha_value());
    if (previous) {
      word_prior += kappa * (*previous);
      doc_prior = alpha_total * previous_mean;
    }
    auto fit = sample_slice(docs, V, word_prior, doc_prior, config, slice_seed(config, t), previous);
    beta[t] = std::move(fit.beta);
    mass[t] = fit.topic_mass;
    observed[t] = true;
    VectorXd m = mean_theta(fit.theta, K);
    alpha.row(ti) = m.transpose();
    auto slice_mixtures = to_mixtures(docs, std::move(fit.theta));
    std::move(slice_mixtures.begin(), slice_mixtures.end(), std::back_inserter(mixtures));
    previous = &beta[t];
    previous_mean = m;
  }

  // Backward smoothing over observed slices: each topic is pulled toward its
  // smoothed successor with weight kappa against the tokens it explains.
  std::vector<std::size_t> seen;
  for (std::size_t t = 0; t < T; ++t)
    if (observed[t]) seen.push_back(t);
  for (std::size_t i = seen.size(); i-- > 1;) {
    const std::size_t t = seen[i - 1], next = seen[i];
    for (int k = 0; k < K; ++k) {
      const double lambda = kappa / (kappa + mass[t][k]);
      VectorXd row = (1.0 - lambda) * beta[t].row(k).transpose() + lambda * beta[next].row(k).transpose();
      beta[t].row(k) = (row / row.sum()).transpose();
    }
  }
  // unobserved slices repeat their (now smoothed) predecessor
  for (std::size_t t = 1; t < T; ++t)
    if (!observed[t] && !seen.empty() && seen.front() < t) beta[t] = beta[t - 1];

  return {DtmModel(std::move(beta), std::move(alpha), config, corpus.vocabulary), std::move(mixtures)};
}

RoleMixture infer_theta(const DtmModel& model, const Document& doc) {
  const auto& config = model.config();
  const int K = config.topics;
  if (doc.slice < 0 || static_cast<std::size_t>(doc.slice) >= model.num_slices())
    throw std::invalid_argument("infer_theta: slice " + std::to_string(doc.slice) + " out of range");
  const MatrixXd& beta = model.beta(static_cast<std::size_t>(doc.slice));
  const double a = config.alpha_value();

  std::vector<int> word;
  for (const auto& [term, count] : doc.terms) {
    if (term < 0 || static_cast<std::size_t>(term) >= model.vocabulary_size())
      throw std::invalid_argument("infer_theta: term id outside vocabulary");
    for (std::int64_t c = 0; c < count; ++c) word.push_back(term);
  }
  if (word.empty()) return {doc.user, doc.slice, std::vector<double>(K, 1.0 / K)};

  Rng rng(derive_seed(config.seed, stable_hash("fold-in"),
                      stable_hash(doc.user) ^ static_cast<std::uint64_t>(doc.slice)));
  const std::size_t N = word.size();
  std::vector<int> z(N), n_k(K, 0);
  std::vector<double> p(K), acc(K, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    for (int j = 0; j < K; ++j) p[j] = beta(j, word[i]);
    z[i] = static_cast<int>(sample_discrete(p, rng));
    ++n_k[z[i]];
  }
  int samples = 0;
  for (int iter = 0; iter < config.gibbs_iterations; ++iter) {
    for (std::size_t i = 0; i < N; ++i) {
      --n_k[z[i]];
      for (int j = 0; j < K; ++j) p[j] = (n_k[j] + a) * beta(j, word[i]);
      z[i] = static_cast<int>(sample_discrete(p, rng));
      ++n_k[z[i]];
    }
    if (iter >= config.burn_in) {
      ++samples;
      for (int j = 0; j < K; ++j) acc[j] += (n_k[j] + a) / (static_cast<double>(N) + a * K);
    }
  }
  for (double& v : acc) v /= samples;
  return {doc.user, doc.slice, std::move(acc)};
}

std::vector<std::pair<std::string, double>> top_terms(const DtmModel& model, int k, std::size_t t,
                                                      std::size_t n) {
  if (k < 0 || k >= model.num_topics()) throw std::invalid_argument("top_terms: topic out of range");
  if (t >= model.num_slices()) throw std::invalid_argument("top_terms: slice out of range");
  const auto& row = model.beta(t).row(k);
  std::vector<int> order(static_cast<std::size_t>(row.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return row[a] > row[b]; });
  n = std::min(n, order.size());
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < n; ++i)
    out.emplace_back(model.vocabulary().name(static_cast<std::size_t>(order[i])), row[order[i]]);
  return out;
}

MatrixXd topic_track(const DtmModel& model, int k) {
  if (k < 0 || k >= model.num_topics()) throw std::invalid_argument("topic_track: topic out of range");
  MatrixXd track(static_cast<Eigen::Index>(model.num_slices()), static_cast<Eigen::Index>(model.vocabulary_size()));
  for (std::size_t t = 0; t < model.num_slices(); ++t)
    track.row(static_cast<Eigen::Index>(t)) = model.beta(t).row(k);
  return track;
}

double mean_drift(const DtmModel& model) {
  if (model.num_slices() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t t = 1; t < model.num_slices(); ++t)
    total += (model.beta(t) - model.beta(t - 1)).cwiseAbs().sum();
  return total / (static_cast<double>(model.num_slices() - 1) * model.num_topics());
}

namespace {

void write_matrix_csv(const std::filesystem::path& path, const MatrixXd& m) {
  std::ostringstream out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

MatrixXd read_matrix_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& f : split_csv_line(line)) row.push_back(parse_double(f));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument(path.string() + ": ragged matrix");
    rows.push_back(std::move(row));
  }
  MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

}  // namespace

void save_model(const DtmModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& c = model.config();
  nlohmann::ordered_json j;
  j["topics"] = c.topics;
  j["sigma2"] = c.sigma2;
  j["alpha"] = c.alpha_value();
  j["eta"] = c.eta;
  j["gibbs_iterations"] = c.gibbs_iterations;
  j["burn_in"] = c.burn_in;
  j["seed"] = c.seed;
  j["coupling_scale"] = c.coupling_scale;
  j["coupling_cap"] = c.coupling_cap;
  j["coupling"] = c.coupling();
  j["slices"] = model.num_slices();
  j["vocabulary"] = model.vocabulary().names();
  write_file_atomic(dir / "config.json", j.dump(2) + "\n");
  for (std::size_t t = 0; t < model.num_slices(); ++t)
    write_matrix_csv(dir / ("beta_" + std::to_string(t) + ".csv"), model.beta(t));
  write_matrix_csv(dir / "alpha.csv", model.alpha());
}

DtmModel load_model(const std::filesystem::path& dir) {
  auto j = nlohmann::json::parse(read_file(dir / "config.json"));
  DtmConfig c;
  c.topics = j.at("topics").get<int>();
  c.sigma2 = j.at("sigma2").get<double>();
  c.alpha = j.at("alpha").get<double>();
  c.eta = j.at("eta").get<double>();
  c.gibbs_iterations = j.at("gibbs_iterations").get<int>();
  c.burn_in = j.at("burn_in").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.coupling_scale = j.at("coupling_scale").get<double>();
  c.coupling_cap = j.at("coupling_cap").get<double>();
  auto T = j.at("slices").get<std::size_t>();
  Vocabulary vocab(j.at("vocabulary").get<std::vector<std::string>>());
  std::vector<MatrixXd> beta;
  for (std::size_t t = 0; t < T; ++t) beta.push_back(read_matrix_csv(dir / ("beta_" + std::to_string(t) + ".csv")));
  MatrixXd alpha = T ? read_matrix_csv(dir / "alpha.csv") : MatrixXd(0, c.topics);
  return DtmModel(std::move(beta), std::move(alpha), c, std::move(vocab));
}

void write_mixtures_csv(std::ostream& out, std::span<const RoleMixture> mixtures, int topics) {
  out << "user,quarter";
  for (int k = 0; k < topics; ++k) out << ",theta_" << k;
  out << '\n';
  for (const auto& m : mixtures) {
    if (static_cast<int>(m.theta.size()) != topics) throw std::invalid_argument("mixture width mismatch");
    out << csv_field(m.user) << ',' << m.quarter;
    for (double v : m.theta) out << ',' << format_double(v);
    out << '\n';
  }
}

std::vector<RoleMixture> read_mixtures_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "user" || header[1] != "quarter")
    throw std::invalid_argument("mixtures CSV: bad header");
  std::vector<RoleMixture> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size()) throw std::invalid_argument("mixtures CSV: wrong field count");
    RoleMixture m{f[0], static_cast<int>(parse_int(f[1])), {}};
    for (std::size_t i = 2; i < f.size(); ++i) m.theta.push_back(parse_double(f[i]));
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace rolespace
