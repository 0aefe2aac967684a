#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dssddi {

struct CsvRow {
  std::size_t line;  // 1-based line number in the file
  std::vector<std::string> cells;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

/// Reads a UTF-8 CSV file with a required header row. Handles double-quoted
/// cells, CRLF line ends and a leading byte-order mark. Blank lines are
/// skipped.
CsvTable read_csv(const std::filesystem::path& path);

std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view cell);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Strict parsers; return false on trailing garbage or empty input.
bool parse_double(std::string_view s, double& out);
bool parse_long(std::string_view s, long long& out);

}  // namespace dssddi
