#include "etklab/csv.hpp"

#include <cmath>
#include <cstdio>

#include "etklab/errors.hpp"

namespace etklab {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of negative zero
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) {
  if (header.empty()) throw StructuralError("CSV header must not be empty");
  row(header);
  rows_ = 0;
}

CsvWriter& CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_)
    throw StructuralError("CSV row has " + std::to_string(cells.size()) + " cells, expected " +
                          std::to_string(width_));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ += ',';
    out_ += cells[i];
  }
  out_ += '\n';
  ++rows_;
  return *this;
}

}  // namespace etklab
