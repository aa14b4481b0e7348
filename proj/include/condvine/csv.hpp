#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "condvine/error.hpp"

namespace condvine {

/// Malformed delimited text. Line and column are 1-based (0 if not applicable).
class CsvError : public InterfaceError {
 public:
  CsvError(const std::string& file, std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Comma-separated table with a mandatory header row. Quoted fields are not
/// supported; values may not contain commas.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;  ///< source line of each row
};

CsvTable parse_csv(const std::string& text, const std::string& source = "<memory>");
CsvTable read_csv(const std::filesystem::path& path);

struct NumericTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
  std::vector<std::size_t> row_lines;  ///< source line of each row
};

/// Parses one field as a finite double; throws CsvError at (line, column).
double parse_cell(const std::string& text, const std::string& source, std::size_t line, std::size_t column);

/// Parses every cell as a finite double.
NumericTable parse_numeric_csv(const std::string& text, const std::string& source = "<memory>");
NumericTable read_numeric_csv(const std::filesystem::path& path);

/// Shortest representation that round-trips to the same double.
std::string format_double(double value);

std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);
std::string to_csv(const std::vector<std::string>& header, const Eigen::MatrixXd& values);

/// Reads a whole file; throws InterfaceError if it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
/// Writes a whole file, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace condvine
