#pragma once

#include <string>
#include <vector>

namespace etklab {

struct SvgSeries {
  std::string name;
  std::vector<double> x, y;
  std::vector<double> lo, hi;  // optional shaded band, same length as x
};

struct SvgPlot {
  std::string title, x_label, y_label;
  bool log_x = false, log_y = false;
  std::vector<SvgSeries> series;

  /// Self-contained SVG document; points that cannot be drawn on a log axis are dropped.
  std::string render() const;
};

}  // namespace etklab
