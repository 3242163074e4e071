#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rolespace/vocabulary.hpp"

namespace rolespace {

using UserId = std::string;
using Date = std::chrono::year_month_day;

/// One edit: who, when (seconds after the epoch's midnight UTC) and where.
struct EditEvent {
  UserId user;
  std::int64_t timestamp = 0;
  int namespace_id = 0;

  bool operator==(const EditEvent&) const = default;
};

/// Per-namespace edit counts of one user in one quarter.
struct ActivityRecord {
  UserId user;
  int quarter = 0;
  std::vector<std::int64_t> counts;

  std::int64_t total() const;
  bool operator==(const ActivityRecord&) const = default;
};

struct LineError {
  std::size_t line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<EditEvent> events;
  std::vector<LineError> errors;
};

/// Parses `YYYY-MM-DD`.
Date parse_date(std::string_view text);
std::string format_date(Date date);

/// Parses `YYYY-MM-DDTHH:MM:SS[Z]` into UTC seconds since 1970.
std::int64_t parse_iso8601(std::string_view text);
std::string format_iso8601(std::int64_t unix_seconds);

std::int64_t unix_seconds(Date date);

/// Start of quarter `q` (three calendar months per quarter) in seconds after the epoch.
std::int64_t quarter_start(Date epoch, int quarter);

/// Quarter index of an offset in seconds after the epoch: whole three-month
/// periods elapsed, counting calendar months from the epoch's day of month.
int quarter_of(Date epoch, std::int64_t seconds_since_epoch);

/// Reads `user<TAB>timestamp<TAB>namespace` lines. Bad lines are skipped and
/// reported with their 1-based line number.
ParseResult parse_events(std::istream& in, const Vocabulary& namespaces, Date epoch);

/// Aggregates events into one record per (user, quarter), ordered by user then quarter.
std::vector<ActivityRecord> quarterize(std::span<const EditEvent> events, Date epoch,
                                       std::size_t vocabulary_size);

/// Drops every record at or after `first_excluded_quarter` (an incomplete trailing quarter).
std::vector<ActivityRecord> drop_quarters_from(std::span<const ActivityRecord> records,
                                               int first_excluded_quarter);

/// Keeps every user active in two or more quarters and a seeded random
/// round(fraction * count) subset of the single-quarter users.
std::vector<ActivityRecord> sample_population(std::span<const ActivityRecord> records,
                                              double single_quarter_fraction,
                                              std::uint64_t seed);

/// active quarter count -> number of users
using LifespanHistogram = std::map<int, std::size_t>;

LifespanHistogram lifespan_stats(std::span<const ActivityRecord> records);

void write_records_csv(std::ostream& out, std::span<const ActivityRecord> records,
                       std::size_t vocabulary_size);
std::vector<ActivityRecord> read_records_csv(std::istream& in);

void write_histogram_csv(std::ostream& out, const LifespanHistogram& histogram);
LifespanHistogram read_histogram_csv(std::istream& in);

}  // namespace rolespace
