#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rolespace {

/// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field only if it contains a comma, quote or whitespace break.
std::string csv_field(std::string_view text);

/// Shortest round-trip decimal representation; identical bytes for identical doubles.
std::string format_double(double value);

double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::string trim(std::string_view text);

/// Reads a whole file; throws std::runtime_error naming the path when it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes to `<path>.tmp` and renames over `path`, so readers never see partial output.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace rolespace
