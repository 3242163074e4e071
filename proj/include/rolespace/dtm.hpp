#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rolespace/corpus.hpp"

namespace rolespace {

/// Hyperparameters of the chained-prior dynamic topic model.
///
/// Topic-word distributions drift between slices as a Gaussian random walk with
/// variance `sigma2`. The sampler approximates that chain by feeding each slice's
/// estimate forward as a Dirichlet pseudo-count prior of total mass
/// kappa = min(coupling_scale / sigma2, coupling_cap); small sigma2 means strong
/// coupling and smooth topics.
struct DtmConfig {
  int topics = 7;
  double sigma2 = 0.005;
  /// Symmetric document-topic concentration; defaults to 50 / topics.
  std::optional<double> alpha;
  double eta = 0.01;
  int gibbs_iterations = 200;
  int burn_in = 100;
  std::uint64_t seed = 1;
  double coupling_scale = 1.0;
  double coupling_cap = 1e5;

  double alpha_value() const { return alpha ? *alpha : 50.0 / topics; }
  double coupling() const;
  /// Throws std::invalid_argument naming the violated invariant.
  void validate() const;
};

/// Topic proportions (POAP) of one user-quarter document.
struct RoleMixture {
  UserId user;
  int quarter = 0;
  std::vector<double> theta;

  bool operator==(const RoleMixture&) const = default;
};

struct LdaFit {
  Eigen::MatrixXd beta;  // K x V, rows on the simplex
  std::vector<RoleMixture> mixtures;
};

class DtmModel {
 public:
  DtmModel() = default;
  DtmModel(std::vector<Eigen::MatrixXd> beta, Eigen::MatrixXd alpha, DtmConfig config,
           Vocabulary vocabulary);

  std::size_t num_slices() const { return beta_.size(); }
  int num_topics() const { return config_.topics; }
  std::size_t vocabulary_size() const { return vocabulary_.size(); }

  /// K x V topic-word distributions of slice t.
  const Eigen::MatrixXd& beta(std::size_t t) const { return beta_.at(t); }
  /// T x K mean topic proportions per slice.
  const Eigen::MatrixXd& alpha() const { return alpha_; }
  const DtmConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocabulary_; }

  bool operator==(const DtmModel& other) const;

 private:
  std::vector<Eigen::MatrixXd> beta_;
  Eigen::MatrixXd alpha_;
  DtmConfig config_;
  Vocabulary vocabulary_;
};

struct DtmFit {
  DtmModel model;
  /// One mixture per document, in slice order then document order.
  std::vector<RoleMixture> mixtures;
};

/// Collapsed Gibbs LDA with symmetric priors; beta and theta are averaged over
/// the post-burn-in samples.
LdaFit fit_lda(std::span<const Document> docs, std::size_t vocabulary_size, const DtmConfig& config);

/// Forward pass of per-slice samplers chained through their priors, followed by
/// a backward smoothing pass over the topic-word distributions. With one slice
/// the result equals fit_lda bit for bit.
DtmFit fit_dtm(const TimeSlicedCorpus& corpus, const DtmConfig& config);

/// Fold-in Gibbs estimate of a document's mixture against the frozen topics of its slice.
RoleMixture infer_theta(const DtmModel& model, const Document& doc);

/// Highest-probability terms of topic k in slice t, ties broken by term id.
std::vector<std::pair<std::string, double>> top_terms(const DtmModel& model, int k, std::size_t t,
                                                      std::size_t n);

/// T x V matrix whose row t is beta_{t,k}.
Eigen::MatrixXd topic_track(const DtmModel& model, int k);

/// Mean L1 distance between consecutive slices' topics, over all topics and slice pairs.
double mean_drift(const DtmModel& model);

void save_model(const DtmModel& model, const std::filesystem::path& dir);
DtmModel load_model(const std::filesystem::path& dir);

void write_mixtures_csv(std::ostream& out, std::span<const RoleMixture> mixtures, int topics);
std::vector<RoleMixture> read_mixtures_csv(std::istream& in);

}  // namespace rolespace
