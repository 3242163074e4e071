#include "rolespace/pipeline.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "rolespace/csv.hpp"
#include "rolespace/rng.hpp"
#include "rolespace/svg.hpp"

namespace rolespace {

namespace fs = std::filesystem;

MissingInput::MissingInput(const fs::path& path) : std::runtime_error("missing input: " + path.string()) {}

namespace {

std::string show(int v) { return std::to_string(v); }
std::string show(std::uint64_t v) { return std::to_string(v); }
std::string show(double v) { return format_double(v); }
std::string show(bool v) { return v ? "true" : "false"; }
std::string show(const std::string& v) { return v; }
std::string show(const fs::path& v) { return v.string(); }
std::string show(const Date& v) { return format_date(v); }
std::string show(const std::optional<double>& v) { return v ? format_double(*v) : ""; }
std::string show(const std::optional<Date>& v) { return v ? format_date(*v) : ""; }

void assign(const std::string& s, int& v) { v = static_cast<int>(parse_int(s)); }
void assign(const std::string& s, std::uint64_t& v) {
  std::size_t used = 0;
  if (s.empty() || s.front() == '-') throw std::invalid_argument("expected an unsigned integer, got '" + s + "'");
  v = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument("expected an unsigned integer, got '" + s + "'");
}
void assign(const std::string& s, double& v) { v = parse_double(s); }
void assign(const std::string& s, bool& v) {
  if (s == "true" || s == "1" || s == "yes") v = true;
  else if (s == "false" || s == "0" || s == "no") v = false;
  else throw std::invalid_argument("expected true or false, got '" + s + "'");
}
void assign(const std::string& s, std::string& v) { v = s; }
void assign(const std::string& s, fs::path& v) { v = s; }
void assign(const std::string& s, Date& v) { v = parse_date(s); }
void assign(const std::string& s, std::optional<double>& v) {
  if (s.empty()) v.reset();
  else v = parse_double(s);
}
void assign(const std::string& s, std::optional<Date>& v) {
  if (s.empty()) v.reset();
  else v = parse_date(s);
}

struct Field {
  std::string key;
  bool hashed;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

template <class Access>
Field field(std::string key, Access access, bool hashed = true) {
  return {std::move(key), hashed, [access](const PipelineConfig& c) { return show(access(c)); },
          [access](PipelineConfig& c, const std::string& v) { assign(v, access(c)); }};
}

#define RS_FIELD(key, member) field(key, [](auto& c) -> auto& { return c.member; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      RS_FIELD("run.seed", seed),
      field("paths.out", [](auto& c) -> auto& { return c.out_dir; }, false),
      RS_FIELD("paths.events", events),
      RS_FIELD("paths.namespaces", namespaces),
      RS_FIELD("ingest.epoch", epoch),
      RS_FIELD("ingest.cutoff", cutoff),
      RS_FIELD("ingest.sample_single_quarter", sample_single_quarter),
      RS_FIELD("ingest.single_quarter_fraction", single_quarter_fraction),
      RS_FIELD("dtm.topics", dtm.topics),
      RS_FIELD("dtm.sigma2", dtm.sigma2),
      RS_FIELD("dtm.alpha", dtm.alpha),
      RS_FIELD("dtm.eta", dtm.eta),
      RS_FIELD("dtm.iterations", dtm.gibbs_iterations),
      RS_FIELD("dtm.burn_in", dtm.burn_in),
      RS_FIELD("dtm.coupling_scale", dtm.coupling_scale),
      RS_FIELD("dtm.coupling_cap", dtm.coupling_cap),
      RS_FIELD("cluster.min_active_quarters", profile_min_active),
      RS_FIELD("cluster.rank", nmf.rank),
      RS_FIELD("cluster.max_iter", nmf.max_iter),
      RS_FIELD("cluster.tol", nmf.tol),
      RS_FIELD("cluster.inner_max_iter", nmf.inner_max_iter),
      RS_FIELD("cluster.inner_tol", nmf.inner_tol),
      RS_FIELD("cluster.dominant_threshold", dominant_threshold),
      RS_FIELD("churn.window", churn.window),
      RS_FIELD("churn.departed_horizon", churn.departed_horizon),
      RS_FIELD("churn.staying_horizon", churn.staying_horizon),
      RS_FIELD("churn.delta", churn.delta),
      RS_FIELD("churn.churn_share", churn.churn_share),
      RS_FIELD("churn.stay_share", churn.stay_share),
      RS_FIELD("churn.min_active_quarters", churn.min_active_quarters),
      RS_FIELD("classifier.kind", classifier),
      RS_FIELD("classifier.folds", folds),
      RS_FIELD("classifier.n_trees", forest.n_trees),
      RS_FIELD("classifier.max_depth", forest.max_depth),
      RS_FIELD("classifier.features_per_split", forest.features_per_split),
      RS_FIELD("classifier.min_leaf", forest.min_leaf),
      field("classifier.threads", [](auto& c) -> auto& { return c.forest.threads; }, false),
      RS_FIELD("classifier.l2", logistic.l2),
      RS_FIELD("classifier.learning_rate", logistic.learning_rate),
      RS_FIELD("classifier.max_iter", logistic.max_iter),
      RS_FIELD("classifier.tol", logistic.tol),
      RS_FIELD("synth.users", synth.users),
      RS_FIELD("synth.quarters", synth.quarters),
      RS_FIELD("synth.topics", synth_topics),
      RS_FIELD("synth.terms", synth_terms),
      RS_FIELD("synth.leakage", synth_leakage),
      RS_FIELD("synth.drift_sigma2", synth.drift_sigma2),
      RS_FIELD("synth.dominant_concentration", synth.dominant_concentration),
      RS_FIELD("synth.background_concentration", synth.background_concentration),
      RS_FIELD("synth.stable_switch", synth.stable_switch),
      RS_FIELD("synth.volatile_switch", synth.volatile_switch),
      RS_FIELD("synth.volatile_share", synth.volatile_share),
      RS_FIELD("synth.edits_mean", synth.edits_mean),
      RS_FIELD("synth.edits_dispersion", synth.edits_dispersion),
      RS_FIELD("synth.join_quarters", synth.join_quarters),
      RS_FIELD("synth.base_hazard", synth.base_hazard),
      RS_FIELD("synth.hazard_shift_coupling", synth.hazard_shift_coupling),
      RS_FIELD("synth.epoch", synth.epoch),
      RS_FIELD("report.plots", plots),
      RS_FIELD("report.topic_terms", topic_terms),
  };
  return table;
}

#undef RS_FIELD

}  // namespace

PipelineConfig default_config() { return PipelineConfig{}; }

PipelineConfig PipelineConfig::parse(std::istream& in) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw std::invalid_argument("config: " + e.message() + " at line " + std::to_string(e.line()));
  }
  PipelineConfig config;
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key.emplace(f.key, &f);
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw std::invalid_argument("config: key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      auto it = by_key.find(full);
      if (it == by_key.end()) throw std::invalid_argument("config: unknown setting '" + full + "'");
      try {
        it->second->set(config, trim(value.data()));
      } catch (const std::exception& e) {
        throw std::invalid_argument("config: " + full + ": " + e.what());
      }
    }
  }
  config.validate();
  return config;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw MissingInput(path);
  std::istringstream in(read_file(path));
  return parse(in);
}

std::string PipelineConfig::canonical() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + "=" + f.get(*this) + "\n";
  return out;
}

std::uint64_t PipelineConfig::hash() const {
  std::string text;
  for (const auto& f : fields())
    if (f.hashed) text += f.key + "=" + f.get(*this) + "\n";
  return stable_hash(text);
}

std::uint64_t PipelineConfig::stage_seed(std::string_view stage) const { return derive_seed(seed, stable_hash(stage)); }

SynthConfig PipelineConfig::synth_config() const {
  SynthConfig c = synth;
  c.roles = planted_roles(synth_topics, synth_terms, synth_leakage);
  c.seed = stage_seed("synth");
  return c;
}

DtmConfig PipelineConfig::dtm_config() const {
  DtmConfig c = dtm;
  c.seed = stage_seed("fit-dtm");
  return c;
}

Trainer PipelineConfig::trainer() const {
  if (classifier == "random_forest") return forest_trainer(forest);
  if (classifier == "logistic") return logistic_trainer(logistic);
  throw std::invalid_argument("config: classifier.kind must be random_forest or logistic");
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (!(single_quarter_fraction >= 0.0 && single_quarter_fraction <= 1.0))
    fail("ingest.single_quarter_fraction must lie in [0, 1]");
  dtm.validate();
  if (profile_min_active < 1) fail("cluster.min_active_quarters must be >= 1");
  if (nmf.rank < 1) fail("cluster.rank must be >= 1");
  if (nmf.max_iter < 1 || nmf.inner_max_iter < 1) fail("cluster iteration limits must be >= 1");
  if (!(nmf.tol >= 0.0 && nmf.inner_tol > 0.0)) fail("cluster tolerances must be positive");
  if (!(dominant_threshold >= 0.0 && dominant_threshold <= 1.0)) fail("cluster.dominant_threshold must lie in [0, 1]");
  churn.validate();
  if (classifier != "random_forest" && classifier != "logistic")
    fail("classifier.kind must be random_forest or logistic");
  if (folds < 2) fail("classifier.folds must be >= 2");
  if (forest.n_trees < 1) fail("classifier.n_trees must be >= 1");
  if (forest.features_per_split < 0) fail("classifier.features_per_split must be >= 0 (0 selects sqrt(p))");
  if (forest.min_leaf < 1) fail("classifier.min_leaf must be >= 1");
  if (!(logistic.l2 >= 0.0 && logistic.learning_rate > 0.0 && logistic.tol > 0.0 && logistic.max_iter >= 1))
    fail("logistic settings must be positive");
  if (synth_topics < 1 || synth_terms < synth_topics) fail("synth.terms must be >= synth.topics >= 1");
  if (topic_terms < 1) fail("report.topic_terms must be >= 1");
  synth_config().validate();
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"synth",   "ingest",  "corpus", "fit-dtm", "profiles", "cluster",
                                                 "dataset", "train",   "eval",   "ablate",  "report"};
  return names;
}

fs::path stage_dir(const PipelineConfig& config, const std::string& stage) { return config.out_dir / stage; }

namespace {

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

const fs::path& require(const fs::path& path) {
  if (!fs::exists(path)) throw MissingInput(path);
  return path;
}

std::istringstream open_input(const fs::path& path) { return std::istringstream(read_file(require(path))); }

/// Collects a stage's outputs and writes its manifest last.
class StageWriter {
 public:
  StageWriter(const PipelineConfig& config, std::string stage) : config_(config), stage_(std::move(stage)) {
    dir_ = stage_dir(config, stage_);
    fs::create_directories(dir_);
  }
  const fs::path& dir() const { return dir_; }
  void input(const fs::path& path) { inputs_.push_back(fs::relative(path, config_.out_dir).generic_string()); }
  void write(const std::string& name, std::string_view content) {
    write_file_atomic(dir_ / name, content);
    outputs_.push_back(name);
  }
  void record(const std::string& name) { outputs_.push_back(name); }
  void warn(std::string message) { warnings_.push_back(std::move(message)); }
  void warn_all(const std::vector<std::string>& messages) {
    warnings_.insert(warnings_.end(), messages.begin(), messages.end());
  }
  void finish(std::ostream& log) {
    nlohmann::ordered_json j;
    j["stage"] = stage_;
    j["config_hash"] = hex(config_.hash());
    j["seed"] = config_.seed;
    j["stage_seed"] = config_.stage_seed(stage_);
    j["inputs"] = inputs_;
    std::sort(outputs_.begin(), outputs_.end());
    j["outputs"] = outputs_;
    j["warnings"] = warnings_;
    write_file_atomic(dir_ / "manifest.json", j.dump(2) + "\n");
    for (const auto& w : warnings_) log << "warning: " << stage_ << ": " << w << "\n";
    log << stage_ << ": wrote " << outputs_.size() << " files to " << dir_.string() << "\n";
  }

 private:
  const PipelineConfig& config_;
  std::string stage_;
  fs::path dir_;
  std::vector<std::string> inputs_, outputs_, warnings_;
};

template <class Fn>
std::string to_text(Fn&& fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

Vocabulary synth_vocabulary(int terms) {
  if (terms == 28) return Vocabulary::wikipedia_default();
  std::vector<std::string> names;
  for (int v = 0; v < terms; ++v) names.push_back("ns_" + std::to_string(v));
  return Vocabulary(std::move(names));
}

fs::path events_path(const PipelineConfig& c) { return c.events.empty() ? stage_dir(c, "synth") / "events.tsv" : c.events; }

Vocabulary ingest_vocabulary(const PipelineConfig& c, StageWriter& w) {
  fs::path path = c.namespaces;
  if (path.empty() && c.events.empty()) path = stage_dir(c, "synth") / "namespaces.txt";
  if (path.empty()) return Vocabulary::wikipedia_default();
  auto in = open_input(path);
  if (path.is_relative() || path.string().rfind(c.out_dir.string(), 0) == 0) w.input(path);
  return Vocabulary::parse(in);
}

void stage_synth(const PipelineConfig& c, std::ostream& log) {
  StageWriter w(c, "synth");
  const auto sc = c.synth_config();
  const auto pop = generate_population(sc);
  const auto vocab = synth_vocabulary(sc.terms());
  w.write("events.tsv", to_text([&](std::ostream& o) { write_events_tsv(o, pop.events, vocab, sc.epoch); }));
  w.write("namespaces.txt", to_text([&](std::ostream& o) { vocab.write(o); }));
  w.write("truth.json", truth_to_json(pop.truth).dump() + "\n");
  log << "synth: " << pop.truth.users.size() << " users, " << pop.events.size() << " edits\n";
  w.finish(log);
}

void stage_ingest(const PipelineConfig& c, std::ostream& log) {
  StageWriter w(c, "ingest");
  const fs::path events = events_path(c);
  auto in = open_input(events);
  if (c.events.empty()) w.input(events);
  const Vocabulary vocab = ingest_vocabulary(c, w);
  const Date epoch = c.events.empty() ? c.synth.epoch : c.epoch;
  const auto parsed = parse_events(in, vocab, epoch);
  auto records = quarterize(parsed.events, epoch, vocab.size());
  if (c.cutoff) {
    const auto offset = unix_seconds(*c.cutoff) - unix_seconds(epoch);
    if (offset < 0) throw std::invalid_argument("config: ingest.cutoff precedes ingest.epoch");
    const int first_dropped = quarter_of(epoch, offset);
    records = drop_quarters_from(records, first_dropped);
  }
  const auto histogram = lifespan_stats(records);
  const auto kept = c.sample_single_quarter
                        ? sample_population(records, c.single_quarter_fraction, c.stage_seed("ingest"))
                        : records;
  w.write("records.csv", to_text([&](std::ostream& o) { write_records_csv(o, kept, vocab.size()); }));
  w.write("lifespan.csv", to_text([&](std::ostream& o) { write_histogram_csv(o, histogram); }));
  w.write("errors.csv", to_text([&](std::ostream& o) {
            o << "line,message\n";
            for (const auto& e : parsed.errors) o << e.line << ',' << csv_field(e.message) << '\n';
          }));
  w.write("namespaces.txt", to_text([&](std::ostream& o) { vocab.write(o); }));
  nlohmann::ordered_json summary;
  summary["epoch"] = format_date(epoch);
  summary["events"] = parsed.events.size();
  summary["rejected_lines"] = parsed.errors.size();
  summary["records_before_sampling"] = records.size();
  summary["records"] = kept.size();
  summary["users_before_sampling"] = [&] {
    std::size_t n = 0;
    for (auto [q, count] : histogram) n += count;
    return n;
  }();
  w.write("summary.json", summary.dump(2) + "\n");
  if (!parsed.errors.empty()) w.warn(std::to_string(parsed.errors.size()) + " malformed lines skipped (see errors.csv)");
  w.finish(log);
}

std::vector<ActivityRecord> load_records(const PipelineConfig& c, StageWriter& w) {
  const fs::path path = stage_dir(c, "ingest") / "records.csv";
  auto in = open_input(path);
  w.input(path);
  return read_records_csv(in);
}

Vocabulary load_ingest_vocabulary(const PipelineConfig& c, StageWriter& w) {
  const fs::path path = stage_dir(c, "ingest") / "namespaces.txt";
  auto in = open_input(path);
  w.input(path);
  return Vocabulary::parse(in);
}

void stage_corpus(const PipelineConfig& c, std::ostream& log) {
  StageWriter w(c, "corpus");
  const auto records = load_records(c, w);
  const auto vocab = load_ingest_vocabulary(c, w);
  const auto corpus = build_corpus(records, vocab);
  save_corpus(corpus, w.dir());
  w.record("vocab.txt");
  for (std::size_t t = 0; t < corpus.num_slices(); ++t) w.record("slice_" + std::to_string(t) + ".csv");
  const auto stats = corpus_stats(corpus);
  nlohmann::ordered_json j;
  j["slices"] = stats.slices;
  j["documents"] = stats.documents;
  j["users"] = stats.users;
  j["tokens"] = stats.tokens;
  j["vocabulary_size"] = vocab.size();
  w.write("stats.json", j.dump(2) + "\n");
  w.finish(log);
}

TimeSlicedCorpus load_corpus_input(const PipelineConfig& c, StageWriter& w) {
  const fs::path dir = stage_dir(c, "corpus");
  require(dir / "vocab.txt");
  w.input(dir / "vocab.txt");
  return load_corpus(dir);
}

void stage_fit_dtm(const PipelineConfig& c, std::ostream& log) {
  StageWriter w(c, "fit-dtm");
  const auto corpus = load_corpus_input(c, w);
  const auto fit = fit_dtm(corpus, c.dtm_config());
  save_model(fit.model, w.dir());
  w.record("config.json");
  w.record("alpha.csv");
  for (std::size_t t = 0; t < fit.model.num_slices(); ++t) w.record("beta_" + std::to_string(t) + ".csv");
  w.write("mixtures.csv", to_text([&](std::ostream& o) { write_mixtures_csv(o, fit.mixtures, fit.model.num_topics()); }));
  w.write("top_terms.csv", to_text([&](std::ostream& o) {
            o << "topic,slice,rank,term,probability\n";
            for (int k = 0; k < fit.model.num_topics(); ++k)
              for (std::size_t t = 0; t < fit.model.num_slices(); ++t) {
                const auto top = top_terms(fit.model, k, t, static_cast<std::size_t>(c.topic_terms));
                for (std::size_t r = 0; r < top.size(); ++r)
                  o << k << ',' << t << ',' << r << ',' << csv_field(top[r].first) << ',' << format_double(top[r].second)
                    << '\n';
              }
          }));
  nlohmann::ordered_json summary;
  summary["slices"] = fit.model.num_slices();
  summary["topics"] = fit.model.num_topics();
  summary["coupling"] = c.dtm_config().coupling();
  summary["mean_drift"] = mean_drift(fit.model);
  w.write("summary.json", summary.dump(2) + "\n");
  const fs::path truth_path = stage_dir(c, "synth") / "truth.json";
  if (c.events.empty() && fs::exists(truth_path)) {
    w.input(truth_path);
    const auto j = nlohmann::json::parse(read_file(truth_path));
    GroundTruth truth;
    for (const auto& slice : j.at("beta")) {
      const auto rows = slice.get<std::vector<std::vector<double>>>();
      Eigen::MatrixXd b(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.at(0).size()));
      for (std::size_t k = 0; k < rows.size(); ++k)
        for (std::size_t v = 0; v < rows[k].size(); ++v)
          b(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v)) = rows[k][v];
      truth.beta.push_back(std::move(b));
    }
    if (truth.beta.front().rows() == fit.model.num_topics())
      w.write("recovery.json", to_json(evaluate_recovery(fit.model, truth)).dump(2) + "\n");
    else
      w.warn("planted role count differs from dtm.topics; recovery not evaluated");
  }
  w.finish(log);
}

struct MixtureInput {
  std::vector<RoleMixture> mixtures;
  int quarters = 0;
  int roles = 0;
};

MixtureInput load_mixtures(const PipelineConfig& c, StageWriter& w) {
  const fs::path dir = stage_dir(c, "fit-dtm");
  auto in = open_input(dir / "mixtures.csv");
  w.input(dir / "mixtures.csv");
  const auto j = nlohmann::json::parse(read_file(require(dir / "summary.json")));
  w.input(dir / "summary.json");
  return {read_mixtures_csv(in), j.at("slices").get<int>(), j.at("topics").get<int>()};
}

void stage_profiles(const PipelineConfig& c, std::ostream& log) {
  StageWriter w(c, "profiles");
  const auto m = load_mixtures(c, w);
  const auto built = build_profile_matrix(m.mixtures, c.profile_min_active, m.quarters, m.roles);
  w.warn_all(built.warnings);
  w.write("profiles.csv", to_text([&](std::ostream& o) { write_profile_csv(o, built.matrix); }));
  nlohmann::ordered_json j;
  j["users"] = built.matrix.users.size();
  j["quarters"] = m.quarters;
  j["roles"] = m.roles;
  j["min_active_quarters"] = c.profile_min_active;
  w.write("profiles.json", j.dump(2) + "\n");
  w.finish(log);
}

void stage_cluster(const PipelineConfig& c, std::ostream& log) {
  StageWriter w(c, "cluster");
  const fs::path dir = stage_dir(c, "profiles");
  const auto meta = nlohmann::json::parse(read_file(require(dir / "profiles.json")));
  auto in = open_input(dir / "profiles.csv");
  w.input(dir / "profiles.csv");
  const auto profile = read_profile_csv(in, meta.at("quarters").get<int>(), meta.at("roles").get<int>());
  if (profile.users.empty()) throw std::invalid_argument("cluster: no users in the profile matrix");
  NmfOptions options = c.nmf;
  const auto max_rank = static_cast<int>(std::min(profile.values.rows(), profile.values.cols()));
  if (options.rank > max_rank) {
    w.warn("rank lowered from " + std::to_string(options.rank) + " to " + std::to_string(max_rank));
    options.rank = max_rank;
  }
  const auto model = fit_nmf(profile.values, options);
  const auto assignment = discretize(model.W, profile.users);
  w.warn_all(assignment.warnings);
  const auto records = load_records(c, w);
  MixtureInput m = load_mixtures(c, w);
  const auto summary = cluster_summary(assignment, records, m.mixtures, c.dominant_threshold);
  w.write("assignments.csv", to_text([&](std::ostream& o) {
            o << "user,cluster\n";
            for (std::size_t i = 0; i < assignment.users.size(); ++i)
              o << csv_field(assignment.users[i]) << ',' << assignment.cluster[i] << '\n';
          }));
  w.write("clusters.csv", to_text([&](std::ostream& o) { write_cluster_report_csv(o, summary); }));
  w.write("clusters.json", cluster_report_json(summary, c.dominant_threshold));
  w.write("objective.csv", to_text([&](std::ostream& o) {
            o << "iteration,objective\n";
            for (std::size_t i = 0; i < model.objective.size(); ++i) o << i << ',' << format_double(model.objective[i]) << '\n';
          }));
  w.finish(log);
}

void stage_dataset(const PipelineConfig& c, std::ostream& log) {
  StageWriter w(c, "dataset");
  const auto m = load_mixtures(c, w);
  std::vector<std::string> warnings;
  const auto windows = enumerate_windows(m.quarters, c.churn, &warnings);
  w.warn_all(warnings);
  const auto histories = histories_from_mixtures(m.mixtures);
  const auto dataset = build_dataset(histories, windows, c.churn, m.quarters, m.roles, c.stage_seed("dataset"));
  w.warn_all(dataset.warnings);
  w.write("dataset.csv", to_text([&](std::ostream& o) { write_dataset_csv(o, dataset); }));
  w.write("dataset.json", dataset_sidecar_json(dataset, c.churn, m.roles));
  w.finish(log);
}

struct DatasetInput {
  ChurnDataset dataset;
  int roles = 0;
};

DatasetInput load_dataset(const PipelineConfig& c, StageWriter& w) {
  const fs::path dir = stage_dir(c, "dataset");
  auto in = open_input(dir / "dataset.csv");
  w.input(dir / "dataset.csv");
  const auto meta = nlohmann::json::parse(read_file(require(dir / "dataset.json")));
  w.input(dir / "dataset.json");
  DatasetInput d{read_dataset_csv(in), 0};
  d.roles = static_cast<int>((d.dataset.feature_names.size() - 5) / 3);
  if (d.dataset.examples.empty()) throw std::invalid_argument("dataset has no labeled examples");
  return d;
}

void stage_train(const PipelineConfig& c, std::ostream& log) {
  StageWriter w(c, "train");
  const auto d = load_dataset(c, w);
  const auto set = to_training_set(d.dataset);
  const auto model = c.trainer()(set, c.stage_seed("train"));
  w.write("model.json", model.to_json().dump(1) + "\n");
  w.write("features.json", nlohmann::ordered_json(d.dataset.feature_names).dump(1) + "\n");
  w.finish(log);
}

std::string metric_cell(const Metric& m) { return m.defined() ? format_double(m.value()) : ""; }

void stage_eval(const PipelineConfig& c, std::ostream& log) {
  StageWriter w(c, "eval");
  const auto d = load_dataset(c, w);
  const auto set = to_training_set(d.dataset);
  const auto gv = cross_validate_by_group(set, c.folds, c.trainer(), c.stage_seed("eval"));
  w.warn_all(gv.warnings);
  nlohmann::ordered_json j;
  j["folds"] = c.folds;
  j["classifier"] = c.classifier;
  j["mean"] = to_json(gv.mean);
  nlohmann::ordered_json windows;
  for (const auto& [g, cv] : gv.groups) windows[std::to_string(g)] = to_json(cv.mean);
  j["windows"] = std::move(windows);
  w.write("report.json", j.dump(2) + "\n");
  w.write("per_window.csv", to_text([&](std::ostream& o) {
            o << "window,instances,churners,tp_rate,fp_rate,precision,recall,f_measure,roc_auc\n";
            for (const auto& [g, cv] : gv.groups) {
              std::size_t churners = 0;
              for (std::size_t i = 0; i < set.size(); ++i) churners += static_cast<std::size_t>(set.group[i] == g && set.y[i] == 1);
              const auto& r = cv.mean;
              o << g << ',' << cv.fold_of.size() << ',' << churners << ',' << metric_cell(r.tp_rate) << ','
                << metric_cell(r.fp_rate) << ',' << metric_cell(r.precision) << ',' << metric_cell(r.recall) << ','
                << metric_cell(r.f_measure) << ',' << metric_cell(r.roc_auc) << '\n';
            }
          }));
  w.write("lift.csv", to_text([&](std::ostream& o) {
            o << "fraction,lift\n";
            for (const auto& p : gv.mean.lift.points) o << format_double(p.fraction) << ',' << format_double(p.lift) << '\n';
          }));
  log << "eval: mean ROC AUC " << metric_cell(gv.mean.roc_auc) << " over " << gv.groups.size() << " windows\n";
  w.finish(log);
}

void stage_ablate(const PipelineConfig& c, std::ostream& log) {
  StageWriter w(c, "ablate");
  const auto d = load_dataset(c, w);
  const auto set = to_training_set(d.dataset);
  const auto groups = feature_groups(d.roles);
  const auto result = ablate(set, groups, c.trainer(), c.folds, c.stage_seed("eval"));
  w.write("ablation.json", to_json(result).dump(2) + "\n");
  w.write("ablation.csv", to_text([&](std::ostream& o) {
            o << "group,delta_roc_auc,delta_f_measure,delta_precision,delta_tp_rate,delta_fp_rate\n";
            for (const auto& e : result.entries)
              o << e.group << ',' << metric_cell(e.deltas.at("roc_auc")) << ',' << metric_cell(e.deltas.at("f_measure"))
                << ',' << metric_cell(e.deltas.at("precision")) << ',' << metric_cell(e.deltas.at("tp_rate")) << ','
                << metric_cell(e.deltas.at("fp_rate")) << '\n';
          }));
  log << "ablate: largest ROC AUC drop from removing " << result.largest_auc_drop() << "\n";
  w.finish(log);
}

void stage_report(const PipelineConfig& c, std::ostream& log) {
  StageWriter w(c, "report");
  const fs::path eval_dir = stage_dir(c, "eval");
  const auto report = nlohmann::json::parse(read_file(require(eval_dir / "report.json")));
  w.input(eval_dir / "report.json");
  const fs::path lifespan_path = stage_dir(c, "ingest") / "lifespan.csv";
  auto lifespan_in = open_input(lifespan_path);
  w.input(lifespan_path);
  const auto histogram = read_histogram_csv(lifespan_in);
  const fs::path dtm_dir = stage_dir(c, "fit-dtm");
  require(dtm_dir / "config.json");
  w.input(dtm_dir / "config.json");
  const auto model = load_model(dtm_dir);

  auto metric = [](const nlohmann::json& m) {
    return m.is_number() ? Metric::of(m.get<double>()) : Metric::undefined(m.at("undefined").get<std::string>());
  };
  std::map<int, EvalReport> per_window;
  for (const auto& [key, r] : report.at("windows").items()) {
    EvalReport e;
    e.tp_rate = metric(r.at("tp_rate"));
    e.fp_rate = metric(r.at("fp_rate"));
    e.precision = metric(r.at("precision"));
    e.recall = metric(r.at("recall"));
    e.f_measure = metric(r.at("f_measure"));
    e.roc_auc = metric(r.at("roc_auc"));
    per_window.emplace(std::stoi(key), std::move(e));
  }
  LiftCurve lift;
  const auto& jl = report.at("mean").at("lift");
  if (jl.is_array())
    for (const auto& p : jl) lift.points.push_back({p.at("fraction").get<double>(), p.at("lift").get<double>()});

  nlohmann::ordered_json summary;
  summary["mean"] = report.at("mean");
  summary["windows"] = per_window.size();
  w.write("summary.json", summary.dump(2) + "\n");
  if (c.plots) {
    w.write("lifespan.svg", lifespan_svg(histogram));
    for (int k = 0; k < model.num_topics(); ++k)
      w.write("topic_" + std::to_string(k) + ".svg", topic_evolution_svg(model, k, static_cast<std::size_t>(c.topic_terms)));
    w.write("window_metrics.svg", window_metrics_svg(per_window));
    w.write("lift.svg", lift_svg(lift));
  }
  w.finish(log);
}

}  // namespace

void run_stage(const std::string& stage, const PipelineConfig& config, std::ostream& log) {
  static const std::map<std::string, void (*)(const PipelineConfig&, std::ostream&)> table = {
      {"synth", stage_synth},       {"ingest", stage_ingest},   {"corpus", stage_corpus},
      {"fit-dtm", stage_fit_dtm},   {"profiles", stage_profiles}, {"cluster", stage_cluster},
      {"dataset", stage_dataset},   {"train", stage_train},     {"eval", stage_eval},
      {"ablate", stage_ablate},     {"report", stage_report}};
  auto it = table.find(stage);
  if (it == table.end()) throw std::invalid_argument("unknown stage '" + stage + "'");
  config.validate();
  it->second(config, log);
}

void run_all(const PipelineConfig& config, std::ostream& log) {
  for (const auto& stage : stage_names()) {
    if (stage == "synth" && !config.events.empty()) continue;
    run_stage(stage, config, log);
  }
}

TrainingSet permute_labels(const TrainingSet& set, std::uint64_t seed) {
  TrainingSet out = set;
  std::map<int, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < set.size(); ++i) rows[set.group.empty() ? 0 : set.group[i]].push_back(i);
  Rng rng(derive_seed(seed, stable_hash("permute")));
  for (const auto& [g, members] : rows) {
    std::vector<int> labels;
    for (auto r : members) labels.push_back(set.y[r]);
    shuffle_in_place(labels, rng);
    for (std::size_t i = 0; i < members.size(); ++i) out.y[members[i]] = labels[i];
  }
  return out;
}

}  // namespace rolespace
