#include "thermoray/csv.hpp"

#include "thermoray/error.hpp"

#include <cmath>
#include <cstdio>

namespace thermoray {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::string& table, std::vector<std::string> columns)
    : out_(path), width_(columns.size()), path_(path) {
  if (!out_) throw Error(ErrorKind::BadScenario, "cannot write " + path.string());
  out_ << "# thermoray-csv schema=" << kCsvSchemaVersion << " table=" << table << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << csv_field(columns[i]);
  out_ << '\n';
}

void CsvWriter::row(const std::vector<Cell>& cells) {
  if (cells.size() != width_) throw Error(ErrorKind::BadSpec, "row width mismatch in " + path_.string());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    if (const double* d = std::get_if<double>(&cells[i])) out_ << format_double(*d);
    else if (const long long* n = std::get_if<long long>(&cells[i])) out_ << *n;
    else out_ << csv_field(std::get<std::string>(cells[i]));
  }
  out_ << '\n';
  ++rows_;
}

}  // namespace thermoray
