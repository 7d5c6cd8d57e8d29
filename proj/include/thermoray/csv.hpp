#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

namespace thermoray {

inline constexpr int kCsvSchemaVersion = 1;

/// CSV table: a "# thermoray-csv schema=1 table=<name>" comment line, a header
/// row, then rows. Doubles are written with 17 significant digits.
class CsvWriter {
 public:
  using Cell = std::variant<double, long long, std::string>;

  CsvWriter(const std::filesystem::path& path, const std::string& table, std::vector<std::string> columns);

  void row(const std::vector<Cell>& cells);
  std::size_t rows() const { return rows_; }

 private:
  std::ofstream out_;
  std::size_t width_;
  std::size_t rows_ = 0;
  std::filesystem::path path_;
};

std::string format_double(double v);

}  // namespace thermoray
