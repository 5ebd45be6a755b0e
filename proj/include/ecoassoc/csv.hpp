#pragma once

#include "ecoassoc/types.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ecoassoc::csv {

/// A CSV file whose first row names the columns and whose first column names
/// the rows. `corner` is the header cell above the row ids.
struct Table {
  std::string corner;
  std::vector<std::string> row_ids;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> cells; // row-major, rows x columns
};

Table read_table(const std::filesystem::path &path);
Table parse_table(std::string_view text, const std::string &source_name);

/// Parses every cell as a double. Errors name the file, row and column.
Matrix numeric(const Table &table, const std::string &source_name);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s, bool &ok);

std::string to_csv(const std::string &corner, const std::vector<std::string> &row_ids,
                   const std::vector<std::string> &columns, const Matrix &values);

/// Writes to a temporary sibling and renames it into place.
void write_atomic(const std::filesystem::path &path, std::string_view content);
std::string read_file(const std::filesystem::path &path);

std::vector<std::string> numbered(const std::string &prefix, std::size_t n);

} // namespace ecoassoc::csv
