#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rolespace {

/// Ordered namespace names; the position of a name is its term id.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> names);

  /// The 28 English Wikipedia namespaces that carried edits in 2013.
  static Vocabulary wikipedia_default();

  /// Parses `name=id` lines; ids must cover 0..V-1 exactly once.
  /// Blank lines and lines starting with '#' are ignored.
  static Vocabulary parse(std::istream& in);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t id) const { return names_.at(id); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<int> id(std::string_view name) const;

  /// Writes `name=id` lines readable by parse().
  void write(std::ostream& out) const;

  bool operator==(const Vocabulary& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace rolespace
