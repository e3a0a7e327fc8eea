#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace severitas {

struct CsvRecord {
  std::vector<std::string> cells;
  std::size_t line = 0;  // 1-based physical line where the record starts
};

/// RFC 4180-style reader: comma separated, optional double-quoted fields
/// with "" escapes and embedded newlines. A trailing CR is stripped.
std::vector<CsvRecord> read_csv_records(std::istream& in);

/// Quotes a cell only when it contains a comma, quote or newline.
std::string csv_escape(std::string_view cell);
std::string csv_join(const std::vector<std::string>& cells);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);
/// Fixed-point rendering with `digits` decimals.
std::string format_fixed(double v, int digits);

/// Strict number parse of a whole (whitespace-trimmed) cell.
bool parse_double(std::string_view text, double& out);

std::string_view trim(std::string_view s);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace severitas
