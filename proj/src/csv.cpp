#include "condvine/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace condvine {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

CsvError::CsvError(const std::string& file, std::size_t line, std::size_t column, const std::string& what)
    : InterfaceError(file + ":" + std::to_string(line) + (column ? ":" + std::to_string(column) : std::string()) +
                     ": " + what),
      line_(line),
      column_(column) {}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    for (auto& f : fields) f = trim(f);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw CsvError(source, line_no, std::min(fields.size(), table.header.size()) + 1,
                     "expected " + std::to_string(table.header.size()) + " fields, found " +
                         std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
    table.row_lines.push_back(line_no);
  }
  if (!have_header) throw CsvError(source, 1, 0, "missing header row");
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path), path.string()); }

double parse_cell(const std::string& s, const std::string& source, std::size_t line, std::size_t column) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw CsvError(source, line, column, "not a finite number: '" + s + "'");
  return v;
}

NumericTable parse_numeric_csv(const std::string& text, const std::string& source) {
  const CsvTable t = parse_csv(text, source);
  NumericTable out;
  out.header = t.header;
  out.row_lines = t.row_lines;
  out.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < t.header.size(); ++c)
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_cell(t.rows[r][c], source, t.row_lines[r], c + 1);
  return out;
}

NumericTable read_numeric_csv(const std::filesystem::path& path) {
  return parse_numeric_csv(read_text_file(path), path.string());
}

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  auto append = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += fields[i];
    }
    out += '\n';
  };
  append(header);
  for (const auto& r : rows) append(r);
  return out;
}

std::string to_csv(const std::vector<std::string>& header, const Eigen::MatrixXd& values) {
  std::vector<std::vector<std::string>> rows(static_cast<std::size_t>(values.rows()));
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j) rows[static_cast<std::size_t>(i)].push_back(format_double(values(i, j)));
  return to_csv(header, rows);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InterfaceError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InterfaceError("cannot write " + path.string());
  out << text;
  if (!out) throw InterfaceError("write failed for " + path.string());
}

}  // namespace condvine
