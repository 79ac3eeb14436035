#pragma once

// Minimal SVG 1.1 line plots: fixed 800x400 viewBox, one polyline per curve.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "adclab/errors.hpp"

namespace adclab::svg {

struct Curve {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string stroke = "#000000";
  bool dashed = false;
};

inline const char* class_color(std::size_t k) {
  static constexpr const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                            "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  return palette[k % (sizeof(palette) / sizeof(palette[0]))];
}

namespace detail {
inline std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}
}  // namespace detail

inline constexpr double kWidth = 800.0;
inline constexpr double kHeight = 400.0;

/// Renders curves into a single panel. Output bytes depend only on inputs.
inline std::string render(const std::vector<Curve>& curves, const std::string& title) {
  if (curves.empty()) throw MissingData("nothing to plot");
  double x0 = 1e300, x1 = -1e300, y1 = 0.0;
  for (const auto& c : curves) {
    for (double v : c.x) {
      x0 = std::min(x0, v);
      x1 = std::max(x1, v);
    }
    for (double v : c.y) y1 = std::max(y1, v);
  }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > 0.0)) y1 = 1.0;
  y1 *= 1.05;

  const double left = 50, right = 20, top = 40, bottom = 40;
  const double pw = kWidth - left - right, ph = kHeight - top - bottom;
  const auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
  const auto py = [&](double v) { return top + ph - std::clamp(v / y1, 0.0, 1.0) * ph; };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"800\" height=\"400\" "
       "viewBox=\"0 0 800 400\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"400\" fill=\"#ffffff\"/>\n";
  s += "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"16\">" + detail::escape(title) + "</text>\n";
  s += "<line x1=\"" + detail::fixed(left) + "\" y1=\"" + detail::fixed(top + ph) + "\" x2=\"" +
       detail::fixed(left + pw) + "\" y2=\"" + detail::fixed(top + ph) +
       "\" stroke=\"#444444\"/>\n";
  s += "<text x=\"" + detail::fixed(left) + "\" y=\"" + detail::fixed(kHeight - 12) +
       "\" font-family=\"sans-serif\" font-size=\"11\">" + detail::fixed(x0) + "</text>\n";
  s += "<text x=\"" + detail::fixed(left + pw) + "\" y=\"" + detail::fixed(kHeight - 12) +
       "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + detail::fixed(x1) +
       "</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    s += "<polyline fill=\"none\" stroke=\"" + c.stroke + "\" stroke-width=\"1.5\"";
    if (c.dashed) s += " stroke-dasharray=\"6,4\"";
    s += " points=\"";
    const std::size_t n = std::min(c.x.size(), c.y.size());
    for (std::size_t j = 0; j < n; ++j) {
      if (j) s += ' ';
      s += detail::fixed(px(c.x[j])) + "," + detail::fixed(py(c.y[j]));
    }
    s += "\"><title>" + detail::escape(c.label) + "</title></polyline>\n";
    const double ly = top + 14.0 * static_cast<double>(i);
    s += "<text x=\"" + detail::fixed(kWidth - right - 4) + "\" y=\"" + detail::fixed(ly + 10) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + c.stroke +
         "\">" + detail::escape(c.label) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace adclab::svg
