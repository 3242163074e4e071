#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rolespace/ablation.hpp"
#include "rolespace/churn.hpp"
#include "rolespace/classify.hpp"
#include "rolespace/dtm.hpp"
#include "rolespace/ingest.hpp"
#include "rolespace/nmf.hpp"
#include "rolespace/synth.hpp"

namespace rolespace {

/// Raised when a stage input is absent; the message names the path.
class MissingInput : public std::runtime_error {
 public:
  explicit MissingInput(const std::filesystem::path& path);
};

struct PipelineConfig {
  std::uint64_t seed = 1;

  std::filesystem::path out_dir = "out";
  /// Event TSV; when empty the `synth` stage output is used.
  std::filesystem::path events;
  /// `name=id` namespace map; when empty the synth map or the built-in Wikipedia list is used.
  std::filesystem::path namespaces;

  Date epoch = Date{std::chrono::year{2001}, std::chrono::month{1}, std::chrono::day{1}};
  /// Collection date; its (incomplete) quarter and later ones are dropped.
  std::optional<Date> cutoff;
  bool sample_single_quarter = true;
  double single_quarter_fraction = 0.2;

  DtmConfig dtm;

  int profile_min_active = 4;
  NmfOptions nmf;
  double dominant_threshold = 0.15;

  ChurnConfig churn;

  std::string classifier = "random_forest";
  ForestConfig forest;
  LogisticConfig logistic;
  int folds = 10;

  SynthConfig synth;
  int synth_topics = 7;
  int synth_terms = 28;
  double synth_leakage = 0.02;

  bool plots = true;
  int topic_terms = 5;

  /// Parses INI text; unknown sections or keys are errors.
  static PipelineConfig parse(std::istream& in);
  static PipelineConfig load(const std::filesystem::path& path);

  /// `section.key=value` lines for every setting, in a fixed order.
  std::string canonical() const;
  std::uint64_t hash() const;
  void validate() const;

  /// Derived per-stage seed.
  std::uint64_t stage_seed(std::string_view stage) const;
  SynthConfig synth_config() const;
  DtmConfig dtm_config() const;
  Trainer trainer() const;
};

/// Settings used when no config file is given.
PipelineConfig default_config();

const std::vector<std::string>& stage_names();

/// Runs one stage, reading earlier stages' outputs under out_dir. Throws
/// std::invalid_argument for an unknown stage or a config violation,
/// MissingInput for absent inputs.
void run_stage(const std::string& stage, const PipelineConfig& config, std::ostream& log);

/// Every stage in order: synth (only when no events path is set), ingest,
/// corpus, fit-dtm, profiles, cluster, dataset, train, eval, ablate, report.
void run_all(const PipelineConfig& config, std::ostream& log);

/// Stage output directory under out_dir.
std::filesystem::path stage_dir(const PipelineConfig& config, const std::string& stage);

/// Permutes labels within each group, keeping features and group sizes.
TrainingSet permute_labels(const TrainingSet& set, std::uint64_t seed);

}  // namespace rolespace
