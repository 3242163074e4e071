#include "rolespace/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "rolespace/csv.hpp"

namespace rolespace {

std::int64_t Document::total() const {
  std::int64_t sum = 0;
  for (const auto& [term, count] : terms) sum += count;
  return sum;
}

TimeSlicedCorpus build_corpus(std::span<const ActivityRecord> records, const Vocabulary& vocabulary) {
  TimeSlicedCorpus corpus;
  corpus.vocabulary = vocabulary;
  const std::size_t V = vocabulary.size();
  int max_quarter = -1;
  for (const auto& r : records) {
    if (r.quarter < 0) throw std::invalid_argument("record with negative quarter for user " + r.user);
    for (std::size_t v = V; v < r.counts.size(); ++v)
      if (r.counts[v] != 0)
        throw std::invalid_argument("record (" + r.user + ", quarter " + std::to_string(r.quarter) +
                                    ") uses namespace id " + std::to_string(v) +
                                    " outside vocabulary of size " + std::to_string(V));
    max_quarter = std::max(max_quarter, r.quarter);
  }
  corpus.slices.resize(static_cast<std::size_t>(max_quarter + 1));
  for (const auto& r : records) {
    Document doc{r.user, r.quarter, {}};
    for (std::size_t v = 0; v < std::min(V, r.counts.size()); ++v) {
      if (r.counts[v] < 0) throw std::invalid_argument("negative count for user " + r.user);
      if (r.counts[v] > 0) doc.terms.emplace_back(static_cast<int>(v), r.counts[v]);
    }
    if (doc.terms.empty()) throw std::invalid_argument("record with no activity for user " + r.user);
    corpus.slices[static_cast<std::size_t>(r.quarter)].push_back(std::move(doc));
  }
  return corpus;
}

CorpusStats corpus_stats(const TimeSlicedCorpus& corpus) {
  CorpusStats stats;
  stats.slices = corpus.num_slices();
  std::set<UserId> users;
  for (const auto& slice : corpus.slices) {
    stats.documents += slice.size();
    for (const auto& doc : slice) {
      users.insert(doc.user);
      stats.tokens += doc.total();
    }
  }
  stats.users = users.size();
  return stats;
}

void save_corpus(const TimeSlicedCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream vocab;
  for (const auto& name : corpus.vocabulary.names()) vocab << name << '\n';
  write_file_atomic(dir / "vocab.txt", vocab.str());
  for (std::size_t t = 0; t < corpus.num_slices(); ++t) {
    std::ostringstream out;
    out << "user,term_id,count\n";
    for (const auto& doc : corpus.slices[t])
      for (const auto& [term, count] : doc.terms) out << csv_field(doc.user) << ',' << term << ',' << count << '\n';
    write_file_atomic(dir / ("slice_" + std::to_string(t) + ".csv"), out.str());
  }
}

TimeSlicedCorpus load_corpus(const std::filesystem::path& dir) {
  TimeSlicedCorpus corpus;
  {
    std::istringstream in(read_file(dir / "vocab.txt"));
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line))
      if (!trim(line).empty()) names.push_back(trim(line));
    corpus.vocabulary = Vocabulary(std::move(names));
  }
  for (std::size_t t = 0;; ++t) {
    auto path = dir / ("slice_" + std::to_string(t) + ".csv");
    if (!std::filesystem::exists(path)) break;
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);
    std::vector<Document> docs;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto f = split_csv_line(line);
      if (f.size() != 3) throw std::invalid_argument(path.string() + ": expected 3 fields");
      auto term = static_cast<int>(parse_int(f[1]));
      auto count = parse_int(f[2]);
      if (term < 0 || static_cast<std::size_t>(term) >= corpus.vocabulary.size())
        throw std::invalid_argument(path.string() + ": term id out of range");
      // rows of one document are contiguous
      if (docs.empty() || docs.back().user != f[0])
        docs.push_back({f[0], static_cast<int>(t), {}});
      docs.back().terms.emplace_back(term, count);
    }
    corpus.slices.push_back(std::move(docs));
  }
  return corpus;
}

}  // namespace rolespace
