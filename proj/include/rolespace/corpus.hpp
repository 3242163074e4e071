#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "rolespace/ingest.hpp"
#include "rolespace/vocabulary.hpp"

namespace rolespace {

/// A user's activity in one quarter as a bag of namespace terms.
struct Document {
  UserId user;
  int slice = 0;
  /// (term id, count) pairs with count > 0, ascending by term id.
  std::vector<std::pair<int, std::int64_t>> terms;

  std::int64_t total() const;
  bool operator==(const Document&) const = default;
};

struct TimeSlicedCorpus {
  std::vector<std::vector<Document>> slices;
  Vocabulary vocabulary;

  std::size_t num_slices() const { return slices.size(); }
};

struct CorpusStats {
  std::size_t slices = 0;
  std::size_t documents = 0;
  std::size_t users = 0;
  std::int64_t tokens = 0;
};

/// One document per record, placed in the slice of the record's quarter.
/// Slices run from 0 to the largest quarter seen; quarters without records stay empty.
TimeSlicedCorpus build_corpus(std::span<const ActivityRecord> records, const Vocabulary& vocabulary);

CorpusStats corpus_stats(const TimeSlicedCorpus& corpus);

/// Writes `vocab.txt` and one `slice_<t>.csv` (user,term_id,count) per slice.
void save_corpus(const TimeSlicedCorpus& corpus, const std::filesystem::path& dir);
TimeSlicedCorpus load_corpus(const std::filesystem::path& dir);

}  // namespace rolespace
