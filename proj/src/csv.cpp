#include "opd/csv.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "opd/errors.hpp"

namespace opd::io {

int CsvTable::col(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("empty CSV file: " + path);
  table.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_line(line);
    if (fields.size() != table.header.size()) {
      std::ostringstream msg;
      msg << path << ": row " << table.rows.size() + 2 << " has "
          << fields.size() << " fields, expected " << table.header.size();
      throw ConfigError(msg.str());
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

double parse_double(const std::string& field, const std::string& context) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("cannot parse number '" + field + "' in " + context);
  return v;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path), columns_(header.size()) {
  if (!out_) throw ConfigError("cannot open output file: " + path);
  for (std::size_t i = 0; i < header.size(); ++i)
    out_ << header[i] << (i + 1 < header.size() ? "," : "\n");
}

void CsvWriter::field(const std::string& s) {
  out_ << s << (++in_row_ < columns_ ? "," : "");
}

void CsvWriter::field(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  field(std::string(buf));
}

void CsvWriter::field_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  field(std::string(buf));
}

void CsvWriter::field(long long v) { field(std::to_string(v)); }

void CsvWriter::end_row() {
  out_ << "\n";
  in_row_ = 0;
}

}  // namespace opd::io
