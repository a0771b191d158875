#pragma once

#include <string>
#include <vector>

namespace etklab {

/// Shortest round-trip-safe decimal (17 significant digits, '.' separator).
std::string format_double(double v);

/// Row-oriented CSV builder with '\n' line endings.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& row(const std::vector<std::string>& cells);
  std::string str() const { return out_; }
  std::size_t rows() const { return rows_; }

 private:
  std::size_t width_;
  std::size_t rows_ = 0;
  std::string out_;
};

}  // namespace etklab
