#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace opd::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name, -1 if absent.
  int col(const std::string& name) const;
  bool has(const std::string& name) const { return col(name) >= 0; }
};

// Reads a comma-separated file with a header row. Fields are not quoted in
// any of the formats this tool consumes. Throws ConfigError on I/O failure.
CsvTable read_csv(const std::string& path);

double parse_double(const std::string& field, const std::string& context);

// CSV writer emitting doubles with 6 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void field(const std::string& s);
  void field(double v);
  // Full %.17g precision: for values consumed as data rather than reports.
  void field_full(double v);
  void field(long long v);
  void end_row();

 private:
  std::ofstream out_;
  std::size_t columns_ = 0;
  std::size_t in_row_ = 0;
};

}  // namespace opd::io
