#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace icra {

/// Shortest text that round-trips to the same double; identical on every
/// run so emitted CSVs are byte-reproducible.
std::string format_double(double x);

/// Fixed-precision text for human-facing tables.
std::string format_fixed(double x, int digits);

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

/// Strict numeric parsing; throws DataError on trailing garbage.
double parse_double(std::string_view text);
long parse_int(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);

/// Writes atomically enough for our purposes (truncate + write); creates the
/// parent directory. Throws IoError.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace icra
