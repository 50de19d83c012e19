#pragma once
// Self-contained SVG renderer for the figure battery: multi-series line
// plots with axes, ticks, legend, and optional log scales, plus a heatmap
// mode for per-neuron grids. Output is deterministic byte-for-byte: all
// numeric attributes go through fixed-precision formatting.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "pgnn/errors.hpp"

namespace pgnn::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotStyle {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  double width = 640.0;
  double height = 420.0;
};

namespace detail {

inline std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

// pixel coordinates: fixed two decimals keeps files compact and stable
inline std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

// tick labels: short general format
inline std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

struct AxisScale {
  double lo = 0.0;
  double hi = 1.0;
  bool log = false;

  double fraction(double v) const {
    if (log) return (std::log(v) - std::log(lo)) / (std::log(hi) - std::log(lo));
    return (v - lo) / (hi - lo);
  }
  double at_fraction(double f) const {
    if (log) return std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo)));
    return lo + f * (hi - lo);
  }
};

// Smallest positive value across all series on one axis; used as the clamp
// floor for zeros on a log scale.
inline double min_positive(const std::vector<Series>& series, bool use_x) {
  double mp = 0.0;
  for (const Series& s : series)
    for (double v : (use_x ? s.x : s.y))
      if (v > 0.0 && (mp == 0.0 || v < mp)) mp = v;
  return mp;
}

inline AxisScale fit_axis(const std::vector<Series>& series, bool use_x, bool log) {
  AxisScale ax;
  ax.log = log;
  double lo = 0.0, hi = 0.0;
  bool seen = false;
  const double floor_pos = log ? min_positive(series, use_x) : 0.0;
  if (log && floor_pos == 0.0)
    throw ValidationError("svg: log axis needs at least one positive value");
  for (const Series& s : series)
    for (double v : (use_x ? s.x : s.y)) {
      if (!std::isfinite(v)) throw ValidationError("svg: non-finite plot value");
      double u = v;
      if (log && u <= 0.0) u = floor_pos / 10.0;  // zeros pinned below the data
      if (!seen || u < lo) lo = u;
      if (!seen || u > hi) hi = u;
      seen = true;
    }
  if (!seen) throw ValidationError("svg: empty series");
  if (lo == hi) {  // degenerate range: open up a window around the value
    if (log) {
      lo /= 2.0;
      hi *= 2.0;
    } else {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  ax.lo = lo;
  ax.hi = hi;
  return ax;
}

}  // namespace detail

// Multi-series line plot. Every series becomes exactly one polyline; on a
// log axis, non-positive values are clamped to a floor below the smallest
// positive datum rather than dropped, so point counts are preserved.
inline std::string line_plot(const std::vector<Series>& series, const PlotStyle& style) {
  if (series.empty()) throw ValidationError("svg: no series to plot");
  for (const Series& s : series) {
    if (s.x.empty()) throw ValidationError("svg: series '" + s.label + "' is empty");
    if (s.x.size() != s.y.size())
      throw ValidationError("svg: series '" + s.label + "' has " +
                            std::to_string(s.x.size()) + " x values but " +
                            std::to_string(s.y.size()) + " y values");
  }

  const double ml = 64.0, mr = 24.0, mt = 36.0, mb = 48.0;
  const double w = style.width, h = style.height;
  const double plot_w = w - ml - mr;
  const double plot_h = h - mt - mb;

  detail::AxisScale xs = detail::fit_axis(series, true, style.log_x);
  detail::AxisScale ys = detail::fit_axis(series, false, style.log_y);
  const double x_floor = style.log_x ? detail::min_positive(series, true) / 10.0 : 0.0;
  const double y_floor = style.log_y ? detail::min_positive(series, false) / 10.0 : 0.0;

  auto to_px_x = [&](double v) {
    if (style.log_x && v <= 0.0) v = x_floor;
    return ml + xs.fraction(v) * plot_w;
  };
  auto to_px_y = [&](double v) {
    if (style.log_y && v <= 0.0) v = y_floor;
    return mt + (1.0 - ys.fraction(v)) * plot_h;
  };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::px(w) +
         "\" height=\"" + detail::px(h) + "\" viewBox=\"0 0 " + detail::px(w) + " " +
         detail::px(h) + "\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"" + detail::px(w) + "\" height=\"" +
         detail::px(h) + "\" fill=\"#ffffff\"/>\n";
  out += "<text x=\"" + detail::px(w / 2) +
         "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">" +
         detail::escape_xml(style.title) + "</text>\n";

  // frame
  out += "<rect x=\"" + detail::px(ml) + "\" y=\"" + detail::px(mt) + "\" width=\"" +
         detail::px(plot_w) + "\" height=\"" + detail::px(plot_h) +
         "\" fill=\"none\" stroke=\"#333333\"/>\n";

  // ticks: five per axis at even fractions
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0;
    const double gx = ml + f * plot_w;
    const double gy = mt + (1.0 - f) * plot_h;
    out += "<line x1=\"" + detail::px(gx) + "\" y1=\"" + detail::px(mt + plot_h) +
           "\" x2=\"" + detail::px(gx) + "\" y2=\"" + detail::px(mt + plot_h + 5) +
           "\" stroke=\"#333333\"/>\n";
    out += "<text x=\"" + detail::px(gx) + "\" y=\"" + detail::px(mt + plot_h + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" +
           detail::escape_xml(detail::tick(xs.at_fraction(f))) + "</text>\n";
    out += "<line x1=\"" + detail::px(ml - 5) + "\" y1=\"" + detail::px(gy) +
           "\" x2=\"" + detail::px(ml) + "\" y2=\"" + detail::px(gy) +
           "\" stroke=\"#333333\"/>\n";
    out += "<text x=\"" + detail::px(ml - 8) + "\" y=\"" + detail::px(gy + 3) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
           detail::escape_xml(detail::tick(ys.at_fraction(f))) + "</text>\n";
  }

  // axis labels
  out += "<text x=\"" + detail::px(ml + plot_w / 2) + "\" y=\"" + detail::px(h - 10) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
         detail::escape_xml(style.x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + detail::px(mt + plot_h / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 16 " +
         detail::px(mt + plot_h / 2) + ")\">" + detail::escape_xml(style.y_label) +
         "</text>\n";

  // data
  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = detail::kPalette[si % detail::kPaletteSize];
    std::string pts;
    for (std::size_t i = 0; i < series[si].x.size(); ++i) {
      if (!pts.empty()) pts += ' ';
      pts += detail::px(to_px_x(series[si].x[i])) + "," +
             detail::px(to_px_y(series[si].y[i]));
    }
    out += "<polyline fill=\"none\" stroke=\"";
    out += color;
    out += "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
  }

  // legend, top-right inside the frame
  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = detail::kPalette[si % detail::kPaletteSize];
    const double ly = mt + 14.0 + 16.0 * static_cast<double>(si);
    out += "<line x1=\"" + detail::px(ml + plot_w - 120) + "\" y1=\"" + detail::px(ly) +
           "\" x2=\"" + detail::px(ml + plot_w - 100) + "\" y2=\"" + detail::px(ly) +
           "\" stroke=\"";
    out += color;
    out += "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + detail::px(ml + plot_w - 94) + "\" y=\"" + detail::px(ly + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" +
           detail::escape_xml(series[si].label) + "</text>\n";
  }

  out += "</svg>\n";
  return out;
}

// Heatmap over a dense grid: one rect per cell, rows top-down. Cell colors
// interpolate dark blue -> yellow over the value range.
inline std::string heatmap(const std::vector<std::vector<double>>& grid,
                           const PlotStyle& style) {
  if (grid.empty() || grid.front().empty())
    throw ValidationError("svg: empty heatmap grid");
  const std::size_t rows = grid.size();
  const std::size_t cols = grid.front().size();
  for (const auto& row : grid)
    if (row.size() != cols) throw ValidationError("svg: ragged heatmap grid");

  double lo = grid[0][0], hi = grid[0][0];
  for (const auto& row : grid)
    for (double v : row) {
      if (!std::isfinite(v)) throw ValidationError("svg: non-finite heatmap value");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double span = hi > lo ? hi - lo : 1.0;

  const double ml = 64.0, mr = 24.0, mt = 36.0, mb = 48.0;
  const double w = style.width, h = style.height;
  const double plot_w = w - ml - mr;
  const double plot_h = h - mt - mb;
  const double cw = plot_w / static_cast<double>(cols);
  const double ch = plot_h / static_cast<double>(rows);

  auto channel = [](double a, double b, double f) {
    return static_cast<int>(std::lround(a + (b - a) * f));
  };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::px(w) +
         "\" height=\"" + detail::px(h) + "\" viewBox=\"0 0 " + detail::px(w) + " " +
         detail::px(h) + "\">\n";
  // background and frame are paths: the rect population is exactly the cells
  out += "<path d=\"M0 0H" + detail::px(w) + "V" + detail::px(h) +
         "H0Z\" fill=\"#ffffff\"/>\n";
  out += "<text x=\"" + detail::px(w / 2) +
         "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">" +
         detail::escape_xml(style.title) + "</text>\n";

  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      const double f = (grid[r][c] - lo) / span;
      char color[8];
      std::snprintf(color, sizeof(color), "#%02x%02x%02x", channel(20, 253, f),
                    channel(42, 231, f), channel(96, 37, f));
      out += "<rect x=\"" + detail::px(ml + static_cast<double>(c) * cw) + "\" y=\"" +
             detail::px(mt + static_cast<double>(r) * ch) + "\" width=\"" +
             detail::px(cw) + "\" height=\"" + detail::px(ch) + "\" fill=\"";
      out += color;
      out += "\"/>\n";
    }

  out += "<path d=\"M" + detail::px(ml) + " " + detail::px(mt) + "H" +
         detail::px(ml + plot_w) + "V" + detail::px(mt + plot_h) + "H" +
         detail::px(ml) + "Z\" fill=\"none\" stroke=\"#333333\"/>\n";
  out += "<text x=\"" + detail::px(ml + plot_w / 2) + "\" y=\"" + detail::px(h - 10) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
         detail::escape_xml(style.x_label) + "</text>\n";
  out += "<text x=\"16\" y=\"" + detail::px(mt + plot_h / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 16 " +
         detail::px(mt + plot_h / 2) + ")\">" + detail::escape_xml(style.y_label) +
         "</text>\n";
  out += "</svg>\n";
  return out;
}

}  // namespace pgnn::svg
