#include "rolespace/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "rolespace/csv.hpp"
#include "rolespace/rng.hpp"

namespace rolespace {

namespace chr = std::chrono;

std::int64_t ActivityRecord::total() const {
  std::int64_t sum = 0;
  for (auto c : counts) sum += c;
  return sum;
}

namespace {

bool read_fixed(std::string_view text, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > text.size()) return false;
  auto sub = text.substr(pos, len);
  for (char c : sub)
    if (c < '0' || c > '9') return false;
  std::from_chars(sub.data(), sub.data() + sub.size(), out);
  return true;
}

Date checked_date(int y, int m, int d, std::string_view text) {
  Date date{chr::year{y}, chr::month{static_cast<unsigned>(m)}, chr::day{static_cast<unsigned>(d)}};
  if (!date.ok()) throw std::invalid_argument("invalid calendar date: '" + std::string(text) + "'");
  return date;
}

}  // namespace

Date parse_date(std::string_view text) {
  int y, m, d;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !read_fixed(text, 0, 4, y) ||
      !read_fixed(text, 5, 2, m) || !read_fixed(text, 8, 2, d))
    throw std::invalid_argument("expected YYYY-MM-DD, got '" + std::string(text) + "'");
  return checked_date(y, m, d, text);
}

std::string format_date(Date date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

std::int64_t unix_seconds(Date date) {
  return chr::duration_cast<chr::seconds>(chr::sys_days(date).time_since_epoch()).count();
}

std::int64_t parse_iso8601(std::string_view text) {
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  int hh, mm, ss;
  if (text.size() != 19 || text[10] != 'T' || text[13] != ':' || text[16] != ':' ||
      !read_fixed(text, 11, 2, hh) || !read_fixed(text, 14, 2, mm) || !read_fixed(text, 17, 2, ss))
    throw std::invalid_argument("expected YYYY-MM-DDTHH:MM:SSZ, got '" + std::string(text) + "'");
  if (hh > 23 || mm > 59 || ss > 60)
    throw std::invalid_argument("invalid time of day: '" + std::string(text) + "'");
  Date date = parse_date(text.substr(0, 10));
  return unix_seconds(date) + hh * 3600 + mm * 60 + ss;
}

std::string format_iso8601(std::int64_t unix_secs) {
  auto tp = chr::sys_seconds{chr::seconds{unix_secs}};
  auto day = chr::floor<chr::days>(tp);
  Date date{day};
  chr::hh_mm_ss tod{tp - day};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%sT%02d:%02d:%02dZ", format_date(date).c_str(),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()));
  return buf;
}

std::int64_t quarter_start(Date epoch, int quarter) {
  // Day overflow (e.g. epoch on the 31st) rolls into the next month.
  Date target = epoch + chr::months{3 * quarter};
  return unix_seconds(target) - unix_seconds(epoch);
}

int quarter_of(Date epoch, std::int64_t seconds_since_epoch) {
  auto tp = chr::sys_seconds{chr::seconds{unix_seconds(epoch) + seconds_since_epoch}};
  Date date{chr::floor<chr::days>(tp)};
  int months = (static_cast<int>(date.year()) - static_cast<int>(epoch.year())) * 12 +
               (static_cast<int>(static_cast<unsigned>(date.month())) -
                static_cast<int>(static_cast<unsigned>(epoch.month())));
  int q = months >= 0 ? months / 3 : -((-months + 2) / 3);
  while (quarter_start(epoch, q + 1) <= seconds_since_epoch) ++q;
  while (quarter_start(epoch, q) > seconds_since_epoch) --q;
  return q;
}

ParseResult parse_events(std::istream& in, const Vocabulary& namespaces, Date epoch) {
  ParseResult result;
  const std::int64_t epoch_secs = unix_seconds(epoch);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos || t1 == 0) {
      result.errors.push_back({line_no, "expected 3 tab-separated fields"});
      continue;
    }
    std::string_view view(line);
    auto user = view.substr(0, t1);
    auto stamp = view.substr(t1 + 1, t2 - t1 - 1);
    auto ns_name = view.substr(t2 + 1);
    std::int64_t secs = 0;
    try {
      secs = parse_iso8601(stamp);
    } catch (const std::invalid_argument& e) {
      result.errors.push_back({line_no, e.what()});
      continue;
    }
    if (secs < epoch_secs) {
      result.errors.push_back({line_no, "timestamp before epoch " + format_date(epoch)});
      continue;
    }
    auto ns = namespaces.id(ns_name);
    if (!ns) {
      result.errors.push_back({line_no, "unknown namespace '" + std::string(ns_name) + "'"});
      continue;
    }
    result.events.push_back({std::string(user), secs - epoch_secs, *ns});
  }
  return result;
}

std::vector<ActivityRecord> quarterize(std::span<const EditEvent> events, Date epoch,
                                       std::size_t vocabulary_size) {
  std::map<std::pair<UserId, int>, std::vector<std::int64_t>> cells;
  for (const auto& e : events) {
    if (e.timestamp < 0) throw std::invalid_argument("event timestamp before epoch for user " + e.user);
    if (e.namespace_id < 0 || static_cast<std::size_t>(e.namespace_id) >= vocabulary_size)
      throw std::invalid_argument("namespace id out of range for user " + e.user);
    auto& counts = cells[{e.user, quarter_of(epoch, e.timestamp)}];
    if (counts.empty()) counts.assign(vocabulary_size, 0);
    ++counts[static_cast<std::size_t>(e.namespace_id)];
  }
  std::vector<ActivityRecord> records;
  records.reserve(cells.size());
  for (auto& [key, counts] : cells) records.push_back({key.first, key.second, std::move(counts)});
  return records;
}

std::vector<ActivityRecord> drop_quarters_from(std::span<const ActivityRecord> records,
                                               int first_excluded_quarter) {
  std::vector<ActivityRecord> out;
  for (const auto& r : records)
    if (r.quarter < first_excluded_quarter) out.push_back(r);
  return out;
}

std::vector<ActivityRecord> sample_population(std::span<const ActivityRecord> records,
                                              double single_quarter_fraction, std::uint64_t seed) {
  if (!(single_quarter_fraction >= 0.0 && single_quarter_fraction <= 1.0))
    throw std::invalid_argument("single_quarter_fraction must lie in [0,1]");
  std::map<UserId, std::set<int>> quarters;
  for (const auto& r : records) quarters[r.user].insert(r.quarter);

  std::vector<UserId> singles;
  for (const auto& [user, qs] : quarters)
    if (qs.size() == 1) singles.push_back(user);

  auto keep_count = static_cast<std::size_t>(
      std::llround(single_quarter_fraction * static_cast<double>(singles.size())));
  Rng rng(derive_seed(seed, stable_hash("sample_population")));
  // partial Fisher-Yates: the first keep_count slots hold the sample
  for (std::size_t i = 0; i < keep_count; ++i) {
    std::size_t j = i + uniform_index(rng, singles.size() - i);
    std::swap(singles[i], singles[j]);
  }
  std::set<UserId> kept_singles(singles.begin(), singles.begin() + static_cast<long>(keep_count));

  std::vector<ActivityRecord> out;
  for (const auto& r : records) {
    if (quarters[r.user].size() >= 2 || kept_singles.count(r.user)) out.push_back(r);
  }
  return out;
}

LifespanHistogram lifespan_stats(std::span<const ActivityRecord> records) {
  std::map<UserId, std::set<int>> quarters;
  for (const auto& r : records) quarters[r.user].insert(r.quarter);
  LifespanHistogram hist;
  for (const auto& [user, qs] : quarters) ++hist[static_cast<int>(qs.size())];
  return hist;
}

void write_records_csv(std::ostream& out, std::span<const ActivityRecord> records,
                       std::size_t vocabulary_size) {
  out << "user,quarter";
  for (std::size_t v = 0; v < vocabulary_size; ++v) out << ",ns_" << v;
  out << '\n';
  for (const auto& r : records) {
    if (r.counts.size() != vocabulary_size)
      throw std::invalid_argument("record width does not match vocabulary for user " + r.user);
    out << csv_field(r.user) << ',' << r.quarter;
    for (auto c : r.counts) out << ',' << c;
    out << '\n';
  }
}

std::vector<ActivityRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) return {};
  auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "user" || header[1] != "quarter")
    throw std::invalid_argument("records CSV: bad header");
  const std::size_t width = header.size() - 2;
  std::vector<ActivityRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != header.size())
      throw std::invalid_argument("records CSV line " + std::to_string(line_no) + ": wrong field count");
    ActivityRecord r;
    r.user = f[0];
    r.quarter = static_cast<int>(parse_int(f[1]));
    r.counts.reserve(width);
    for (std::size_t i = 2; i < f.size(); ++i) r.counts.push_back(parse_int(f[i]));
    records.push_back(std::move(r));
  }
  return records;
}

void write_histogram_csv(std::ostream& out, const LifespanHistogram& histogram) {
  out << "active_quarters,user_count\n";
  for (const auto& [q, n] : histogram) out << q << ',' << n << '\n';
}

LifespanHistogram read_histogram_csv(std::istream& in) {
  LifespanHistogram hist;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 2) throw std::invalid_argument("histogram CSV: expected 2 fields");
    hist[static_cast<int>(parse_int(f[0]))] = static_cast<std::size_t>(parse_int(f[1]));
  }
  return hist;
}

}  // namespace rolespace
