// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rolespace/ablation.hpp"
#include "rolespace/churn.hpp"
#include "rolespace/corpus.hpp"
#include "rolespace/csv.hpp"
#include "rolespace/evaluate.hpp"
#include "rolespace/nmf.hpp"
#include "rolespace/pipeline.hpp"
#include "rolespace/rng.hpp"
#include "rolespace/synth.hpp"

using namespace rolespace;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const fs::path kRoot = fs::temp_directory_path() / "rolespace_acceptance";

PipelineConfig config_from(const std::string& ini, const std::string& dir) {
  std::istringstream in(ini);
  auto c = PipelineConfig::parse(in);
  c.out_dir = kRoot / dir;
  c.validate();
  return c;
}

Json read_json(const fs::path& p) { return Json::parse(read_file(p)); }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------- 1
Outcome feature_exactness() {
  UserHistory h{"u", {}};
  for (int q : {10, 11, 12, 14, 16, 17, 18, 19}) h.poap[q] = {1.0, 0.0};
  ChurnConfig c;
  const auto f = compute_features(h, {0, 16, 19}, c, 30, 2);
  UserHistory g{"v", {{3, {0.2, 0.8}}, {4, {0.3, 0.7}}}};
  ChurnConfig c2;
  c2.window = 2;
  const auto d = compute_features(g, {0, 3, 4}, c2, 10, 2);
  const double delta = d[5 + 2];
  const bool ok = f[2] == 0.80 && std::abs(delta - 0.101 / 0.201) < 1e-12;
  return {ok, "frac_active_lifespan=" + fmt(f[2]) + " dpoap=" + format_double(delta)};
}

// ---------------------------------------------------------------- 2
Outcome dtm_degeneracy() {
  SynthConfig s;
  s.users = 500;
  s.quarters = 1;
  s.join_quarters = 1;
  s.seed = 5;
  const auto pop = generate_population(s);
  const auto vocab = Vocabulary::wikipedia_default();
  const auto records = quarterize(pop.events, s.epoch, vocab.size());
  const auto corpus = build_corpus(records, vocab);
  DtmConfig c;
  c.topics = 7;
  bool ok = corpus.num_slices() == 1 && corpus.slices[0].size() == 500;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    c.seed = seed;
    const auto dtm = fit_dtm(corpus, c);
    const auto lda = fit_lda(corpus.slices[0], vocab.size(), c);
    ok = ok && dtm.model.beta(0) == lda.beta && dtm.mixtures == lda.mixtures;
  }
  return {ok, "500 docs, 3 seeds"};
}

// ---------------------------------------------------------------- 3
Outcome planted_recovery() {
  std::string detail;
  bool ok = true;
  for (int seed : {1, 2, 3}) {
    auto c = config_from("[run]\nseed = " + std::to_string(seed) +
                             "\n[synth]\nusers = 2000\nquarters = 12\ntopics = 7\nterms = 28\n[dtm]\ntopics = 7\n",
                         "recovery_" + std::to_string(seed));
    std::ostringstream log;
    for (const char* stage : {"synth", "ingest", "corpus", "fit-dtm"}) run_stage(stage, c, log);
    const double cos = read_json(stage_dir(c, "fit-dtm") / "recovery.json").at("mean_cosine").get<double>();
    ok = ok && cos >= 0.9;
    detail += (detail.empty() ? "" : " ") + std::string("cos=") + fmt(cos);
  }
  return {ok, detail};
}

// ---------------------------------------------------------------- 4
Outcome nmf_correctness() {
  Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(40, 0.2, 5.0), h = Eigen::VectorXd::LinSpaced(30, 1.0, 3.0);
  const Eigen::MatrixXd M = w * h.transpose();
  NmfOptions one;
  one.rank = 1;
  const auto m1 = fit_nmf(M, one);
  const double rel = (M - m1.W * m1.H).norm() / M.norm();
  bool monotone = true, deterministic = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Eigen::MatrixXd R(60, 21);
    for (Eigen::Index i = 0; i < R.rows(); ++i)
      for (Eigen::Index j = 0; j < R.cols(); ++j) R(i, j) = uniform01(rng);
    NmfOptions o;
    o.rank = 7;
    const auto fit = fit_nmf(R, o);
    for (std::size_t i = 1; i < fit.objective.size(); ++i) monotone = monotone && fit.objective[i] <= fit.objective[i - 1];
    const auto a = nndsvd_init(R, 7), b = nndsvd_init(R, 7);
    deterministic = deterministic && a.W == b.W && a.H == b.H;
  }
  return {rel <= 1e-6 && monotone && deterministic,
          "rank1 rel=" + fmt(rel) + " monotone=" + (monotone ? "yes" : "no") +
              " nndsvd_bitwise=" + (deterministic ? "yes" : "no")};
}

struct Sample {
  std::vector<double> scores;
  std::vector<int> labels;
};

Sample random_sample(std::uint64_t seed) {
  Rng rng(seed);
  const auto n = 2 + uniform_index(rng, 999);
  const double base = 0.05 + 0.9 * uniform01(rng);
  const double levels = 1 + static_cast<double>(uniform_index(rng, 200));
  Sample s;
  for (std::size_t i = 0; i < n; ++i) {
    s.labels.push_back(uniform01(rng) < base ? 1 : 0);
    s.scores.push_back(std::floor(uniform01(rng) * levels) / levels);
  }
  s.labels[0] = 1;
  s.labels[1] = 0;
  return s;
}

// ---------------------------------------------------------------- 5
Outcome lift_oracle() {
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto d = random_sample(seed + 500);
    const auto n = d.scores.size();
    std::size_t churners = 0;
    for (int y : d.labels) churners += static_cast<std::size_t>(y);
    // rank = number of instances ahead under descending score, earlier index first on ties
    std::vector<std::size_t> ahead(n, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (d.scores[j] > d.scores[i] || (d.scores[j] == d.scores[i] && j < i)) ++ahead[i];
    const auto curve = lift_curve(d.scores, d.labels);
    for (std::size_t k = 1; k <= 20; ++k) {
      const std::size_t top = (k * n + 19) / 20;
      std::size_t captured = 0;
      for (std::size_t i = 0; i < n; ++i) captured += ahead[i] < top && d.labels[i] == 1;
      const double expected =
          static_cast<double>(captured) / (static_cast<double>(churners) * (static_cast<double>(k) / 20.0));
      ok = ok && curve.points[k - 1].lift == expected;
    }
    ok = ok && curve.points.back().lift == 1.0;
  }
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 300; ++i) {
    s.push_back(1.0 - i / 300.0);
    y.push_back(i < 100);
  }
  const double perfect = lift_curve(s, y).points[1].lift;
  return {ok && perfect == 3.0, "100 datasets, perfect@0.10=" + fmt(perfect)};
}

double pairwise_auc(const Sample& d) {
  long long twice = 0, pairs = 0;
  for (std::size_t i = 0; i < d.scores.size(); ++i)
    for (std::size_t j = 0; j < d.scores.size(); ++j)
      if (d.labels[i] == 1 && d.labels[j] == 0) {
        ++pairs;
        twice += d.scores[i] > d.scores[j] ? 2 : d.scores[i] == d.scores[j] ? 1 : 0;
      }
  return (static_cast<double>(twice) / 2.0) / static_cast<double>(pairs);
}

// ---------------------------------------------------------------- 6
Outcome auc_oracle() {
  std::vector<Sample> cases;
  Sample tied{std::vector<double>(50, 0.4), {}};
  for (int i = 0; i < 50; ++i) tied.labels.push_back(i % 4 == 0);
  cases.push_back(tied);
  Sample ranked;
  for (int i = 0; i < 50; ++i) {
    ranked.scores.push_back(i / 50.0);
    ranked.labels.push_back(i >= 30);
  }
  cases.push_back(ranked);
  for (std::uint64_t seed = 0; seed < 100; ++seed) cases.push_back(random_sample(seed + 9000));
  bool ok = true;
  for (const auto& c : cases) ok = ok && roc_auc(c.scores, c.labels).value() == pairwise_auc(c);
  ok = ok && roc_auc(tied.scores, tied.labels).value() == 0.5 && roc_auc(ranked.scores, ranked.labels).value() == 1.0;
  return {ok, std::to_string(cases.size()) + " datasets"};
}

std::string churn_ini(int seed) {
  return "[run]\nseed = " + std::to_string(seed) +
         "\n[synth]\nhazard_shift_coupling = 3.0\nbase_hazard = 0.1\n[classifier]\nthreads = 1\n";
}

// ---------------------------------------------------------------- 7
Outcome planted_churn() {
  const auto start = std::chrono::steady_clock::now();
  auto c = config_from(churn_ini(1), "churn_1");
  std::ostringstream log;
  for (const auto& stage : stage_names())
    if (stage != "ablate" && stage != "report") run_stage(stage, c, log);
  const double auc = read_json(stage_dir(c, "eval") / "report.json")["mean"]["roc_auc"].get<double>();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::ifstream in(stage_dir(c, "dataset") / "dataset.csv");
  const auto permuted = permute_labels(to_training_set(read_dataset_csv(in)), c.stage_seed("permute"));
  const double null_auc = validate(permuted, c.folds, c.trainer(), c.stage_seed("eval")).roc_auc.value();
  const bool ok = auc >= 0.75 && null_auc >= 0.45 && null_auc <= 0.55 && secs < 300;
  return {ok, "auc=" + fmt(auc) + " permuted=" + fmt(null_auc) + " pipeline " + fmt(secs) + "s"};
}

// ---------------------------------------------------------------- 8
Outcome ablation_direction() {
  bool ok = true;
  std::string detail;
  for (int seed : {1, 2, 3}) {
    auto c = config_from(churn_ini(seed), "churn_" + std::to_string(seed));
    std::ostringstream log;
    if (!fs::exists(stage_dir(c, "dataset") / "dataset.csv"))
      for (const char* stage : {"synth", "ingest", "corpus", "fit-dtm", "profiles", "dataset"}) run_stage(stage, c, log);
    run_stage("ablate", c, log);
    const auto j = read_json(stage_dir(c, "ablate") / "ablation.json");
    const std::string top = j["largest_auc_drop"].get<std::string>();
    double drop = 0.0;
    for (const auto& g : j["groups"])
      if (g["group"] == top) drop = g["deltas"]["roc_auc"].get<double>();
    ok = ok && top == "delta_poap";
    detail += (detail.empty() ? "" : " ") + ("seed" + std::to_string(seed) + ":" + top + "(" + fmt(drop) + ")");
  }
  return {ok, detail};
}

// ---------------------------------------------------------------- 9
Outcome label_semantics() {
  ChurnConfig c;
  c.staying_horizon = 3;
  const Window w{0, 2, 5};
  bool ok = label_user({2, 3, 4, 5}, w, c) == ChurnLabel::Departed &&
            label_user({2, 3, 4, 5, 9}, w, c) == ChurnLabel::Staying &&
            label_user({2, 3, 4, 5, 6}, w, c) == ChurnLabel::Excluded;
  const auto pc = config_from(churn_ini(1), "churn_1");
  const int quarters = read_json(stage_dir(pc, "fit-dtm") / "summary.json").at("slices").get<int>();
  std::ifstream in(stage_dir(pc, "dataset") / "dataset.csv");
  const auto ds = read_dataset_csv(in);
  std::size_t violations = 0;
  for (const auto& ex : ds.examples) {
    const int end = ex.window + pc.churn.window - 1;
    if (end + pc.churn.staying_horizon > quarters - 1 || ex.label == ChurnLabel::Excluded) ++violations;
  }
  ok = ok && violations == 0 && !ds.examples.empty();
  return {ok, std::to_string(ds.examples.size()) + " examples, " + std::to_string(violations) + " censoring violations"};
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".csv" || ext == ".json"))
      out[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

// ---------------------------------------------------------------- 10
Outcome determinism() {
  auto c = config_from(churn_ini(7), "determinism");
  std::ostringstream log;
  run_all(c, log);
  const auto first = snapshot(c.out_dir);
  fs::remove_all(c.out_dir);
  run_all(c, log);
  const auto second = snapshot(c.out_dir);
  std::size_t differing = 0;
  for (const auto& [path, bytes] : first) {
    auto it = second.find(path);
    if (it == second.end() || it->second != bytes) ++differing;
  }
  const bool ok = !first.empty() && first.size() == second.size() && differing == 0;
  return {ok, std::to_string(first.size()) + " files, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  fs::remove_all(kRoot);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"feature exactness", feature_exactness}, {"dtm degeneracy", dtm_degeneracy},
      {"planted role recovery", planted_recovery}, {"nmf correctness", nmf_correctness},
      {"lift oracle", lift_oracle}, {"auc oracle", auc_oracle},
      {"planted churn signal", planted_churn}, {"ablation direction", ablation_direction},
      {"label semantics", label_semantics}, {"determinism", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first << "): " << o.detail
              << " [" << fmt(secs) << "s]" << std::endl;
  }
  fs::remove_all(kRoot);
  return failed ? 1 : 0;
}
