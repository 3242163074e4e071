#include "rolespace/vocabulary.hpp"

#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include "rolespace/csv.hpp"

namespace rolespace {

Vocabulary::Vocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw std::invalid_argument("vocabulary must contain at least one name");
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw std::invalid_argument("vocabulary name must not be empty");
    if (!index_.emplace(names_[i], static_cast<int>(i)).second)
      throw std::invalid_argument("duplicate vocabulary name: " + names_[i]);
  }
}

Vocabulary Vocabulary::wikipedia_default() {
  return Vocabulary({
      "main",           "article_talk",
      "user",           "user_talk",
      "wikipedia",      "wikipedia_talk",
      "file",           "file_talk",
      "mediawiki",      "mediawiki_talk",
      "template",       "template_talk",
      "help",           "help_talk",
      "category",       "category_talk",
      "portal",         "portal_talk",
      "book",           "book_talk",
      "draft",          "draft_talk",
      "education_program", "education_program_talk",
      "timedtext",      "timedtext_talk",
      "module",         "module_talk",
  });
}

Vocabulary Vocabulary::parse(std::istream& in) {
  std::map<long long, std::string> by_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto eq = t.rfind('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("namespace map line " + std::to_string(line_no) + ": expected name=id");
    std::string name = trim(std::string_view(t).substr(0, eq));
    long long id = 0;
    try {
      id = parse_int(std::string_view(t).substr(eq + 1));
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("namespace map line " + std::to_string(line_no) + ": bad id");
    }
    if (id < 0 || !by_id.emplace(id, name).second)
      throw std::invalid_argument("namespace map line " + std::to_string(line_no) +
                                  ": duplicate or negative id " + std::to_string(id));
  }
  std::vector<std::string> names;
  for (auto& [id, name] : by_id) {
    if (id != static_cast<long long>(names.size()))
      throw std::invalid_argument("namespace ids must be contiguous from 0; missing id " +
                                  std::to_string(names.size()));
    names.push_back(name);
  }
  return Vocabulary(std::move(names));
}

std::optional<int> Vocabulary::id(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocabulary::write(std::ostream& out) const {
  for (std::size_t i = 0; i < names_.size(); ++i) out << names_[i] << '=' << i << '\n';
}

}  // namespace rolespace
