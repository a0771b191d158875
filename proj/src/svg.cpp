#include "etklab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace etklab {

namespace {

constexpr double kWidth = 720, kHeight = 460, kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else if (c == '"') out += "&quot;";
    else out += c;
  }
  return out;
}

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0;  // in transformed units

  bool drawable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
  double t(double v) const { return log ? std::log10(v) : v; }

  void fit(const std::vector<double>& vals) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (double v : vals)
      if (drawable(v)) {
        lo = std::min(lo, t(v));
        hi = std::max(hi, t(v));
      }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) {
      const double pad = log ? 0.5 : std::max(std::abs(lo) * 0.1, 0.5);
      lo -= pad;
      hi += pad;
    }
    if (log) {
      lo = std::floor(lo);
      hi = std::ceil(hi);
    } else {
      const double pad = 0.05 * (hi - lo);
      lo -= pad;
      hi += pad;
    }
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      const double step = std::max(1.0, std::ceil((hi - lo) / 8.0));
      for (double e = lo; e <= hi + 1e-9; e += step) out.push_back(e);
      return out;
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) out.push_back(v);
    return out;
  }

  std::string tick_label(double tv) const { return log ? "1e" + label(tv) : label(tv); }
};

}  // namespace

std::string SvgPlot::render() const {
  Axis ax{log_x}, ay{log_y};
  std::vector<double> xs, ys;
  for (const auto& s : series) {
    xs.insert(xs.end(), s.x.begin(), s.x.end());
    ys.insert(ys.end(), s.y.begin(), s.y.end());
    ys.insert(ys.end(), s.lo.begin(), s.lo.end());
    ys.insert(ys.end(), s.hi.begin(), s.hi.end());
  }
  ax.fit(xs);
  ay.fit(ys);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (ax.t(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return kTop + ph - (ay.t(v) - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) +
       "</text>\n";
  for (double tv : ax.ticks()) {
    const double x = kLeft + (tv - ax.lo) / (ax.hi - ax.lo) * pw;
    o += "<line x1=\"" + num(x) + "\" y1=\"" + num(kTop) + "\" x2=\"" + num(x) + "\" y2=\"" + num(kTop + ph) +
         "\" stroke=\"#e0e0e0\"/>\n";
    o += "<text x=\"" + num(x) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
         escape(ax.tick_label(tv)) + "</text>\n";
  }
  for (double tv : ay.ticks()) {
    const double y = kTop + ph - (tv - ay.lo) / (ay.hi - ay.lo) * ph;
    o += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(y) + "\" x2=\"" + num(kLeft + pw) + "\" y2=\"" + num(y) +
         "\" stroke=\"#e0e0e0\"/>\n";
    o += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" +
         escape(ay.tick_label(tv)) + "</text>\n";
  }
  o += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  o += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 18) + "\" text-anchor=\"middle\">" +
       escape(x_label) + "</text>\n";
  o += "<text transform=\"translate(20," + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape(y_label) + "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const std::string color = kPalette[si % (sizeof kPalette / sizeof *kPalette)];
    if (s.lo.size() == s.x.size() && s.hi.size() == s.x.size() && !s.x.empty()) {
      std::string upper, lower;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (!ax.drawable(s.x[i]) || !ay.drawable(s.lo[i]) || !ay.drawable(s.hi[i])) continue;
        upper += num(px(s.x[i])) + "," + num(py(s.hi[i])) + " ";
      }
      for (std::size_t i = s.x.size(); i-- > 0;) {
        if (!ax.drawable(s.x[i]) || !ay.drawable(s.lo[i]) || !ay.drawable(s.hi[i])) continue;
        lower += num(px(s.x[i])) + "," + num(py(s.lo[i])) + " ";
      }
      if (!upper.empty())
        o += "<polygon points=\"" + upper + lower + "\" fill=\"" + color + "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    }
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (ax.drawable(s.x[i]) && ay.drawable(s.y[i])) pts += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
    if (!pts.empty())
      o += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    const double ly = kTop + 10 + 20 * static_cast<double>(si);
    o += "<line x1=\"" + num(kLeft + pw + 14) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(kLeft + pw + 38) +
         "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + num(kLeft + pw + 44) + "\" y=\"" + num(ly + 4) + "\">" + escape(s.name) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

}  // namespace etklab
