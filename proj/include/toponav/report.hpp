#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "toponav/errors.hpp"
#include "toponav/util.hpp"

namespace toponav {

// One named curve: points (x[i], y[i]) drawn as a polyline plus one circle
// marker per point. Markers are the only <circle> elements a figure emits,
// so counting them counts data points.
struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

// One cluster of bars sharing an x position (e.g. one prior level with a
// bar per degree of freedom).
struct BarGroup {
  std::string label;
  std::vector<double> values;
};

struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> bar_names;  // one entry per bar within a group
  std::vector<BarGroup> groups;
};

struct Heatmap {
  std::string title;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<double>> values;  // [row][col]
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

// Pixel coordinates are rounded to 1/100 px before shortest-decimal
// formatting so unrelated FP noise cannot change the byte output.
inline std::string px(double v) {
  return fmt_double(std::round(v * 100.0) / 100.0);
}

// n * 10^e rendered exactly in decimal; tick labels go through this so an
// axis never shows artifacts like 0.30000000000000004.
inline std::string decimal_string(std::int64_t n, int e) {
  if (n == 0) return "0";
  const bool neg = n < 0;
  std::string digits = std::to_string(neg ? -n : n);
  std::string out;
  if (e >= 0) {
    out = digits + std::string(static_cast<std::size_t>(e), '0');
  } else {
    std::size_t frac = static_cast<std::size_t>(-e);
    if (digits.size() <= frac) digits.insert(0, frac - digits.size() + 1, '0');
    digits.insert(digits.size() - frac, 1, '.');
    while (digits.back() == '0') digits.pop_back();
    if (digits.back() == '.') digits.pop_back();
    out = digits;
  }
  return neg ? "-" + out : out;
}

struct TickStep {
  std::int64_t mant;  // 1, 2 or 5
  int exp;
  double value() const { return static_cast<double>(mant) * std::pow(10.0, exp); }
};

inline TickStep choose_step(double range) {
  const double target = range / 6.0;
  int e = static_cast<int>(std::floor(std::log10(target)));
  for (;; ++e) {
    for (std::int64_t m : {1, 2, 5}) {
      TickStep s{m, e};
      if (s.value() >= target) return s;
    }
  }
}

struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  TickStep step{1, 0};
  double map(double v, double px_lo, double px_hi) const {
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

inline Axis make_axis(double lo, double hi, bool include_zero = false) {
  if (include_zero) {
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
  }
  double pad = (hi - lo) * 0.05;
  if (pad <= 0.0) pad = std::max(std::abs(lo) * 0.5, 1.0);
  Axis ax;
  ax.lo = lo - pad;
  ax.hi = hi + pad;
  ax.step = choose_step(ax.hi - ax.lo);
  return ax;
}

// Tick positions as (index, label); tick value = index * step.
inline std::vector<std::pair<double, std::string>> axis_ticks(const Axis& ax) {
  std::vector<std::pair<double, std::string>> out;
  const double step = ax.step.value();
  const auto first = static_cast<std::int64_t>(std::ceil(ax.lo / step - 1e-9));
  const auto last = static_cast<std::int64_t>(std::floor(ax.hi / step + 1e-9));
  for (std::int64_t i = first; i <= last; ++i)
    out.emplace_back(static_cast<double>(i) * step,
                     decimal_string(i * ax.step.mant, ax.step.exp));
  return out;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#9467bd", "#ff7f0e", "#8c564b"};
  return colors[i % 6];
}

inline std::string svg_open(double w, double h) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"";
  s += px(w);
  s += "\" height=\"";
  s += px(h);
  s += "\" viewBox=\"0 0 " + px(w) + " " + px(h) + "\">\n";
  s += "<rect width=\"" + px(w) + "\" height=\"" + px(h) +
       "\" fill=\"#ffffff\"/>\n";
  return s;
}

inline std::string text_at(double x, double y, const std::string& body,
                           const std::string& attrs) {
  return "<text x=\"" + px(x) + "\" y=\"" + px(y) + "\" " + attrs + ">" +
         xml_escape(body) + "</text>\n";
}

inline const char* kFont = "font-family=\"sans-serif\"";

inline void check_series(const Series& s) {
  if (s.x.empty() || s.y.empty())
    throw MissingArtifactError("metric series '" + s.name + "' has no data");
  if (s.x.size() != s.y.size())
    throw Error("metric series '" + s.name + "' has mismatched x/y lengths");
  for (std::size_t i = 0; i < s.x.size(); ++i)
    if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]))
      throw Error("metric series '" + s.name + "' has a non-finite value");
}

// Interpolated two-color ramp, light to dark.
inline std::string ramp_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int a[3] = {0xf7, 0xfb, 0xff};
  const int b[3] = {0x08, 0x30, 0x6b};
  std::string out = "#";
  static const char* digits = "0123456789abcdef";
  for (int c = 0; c < 3; ++c) {
    int v = a[c] + static_cast<int>(std::round(t * (b[c] - a[c])));
    out += digits[(v >> 4) & 0xf];
    out += digits[v & 0xf];
  }
  return out;
}

}  // namespace detail

inline std::string svg_line_chart(const LineChart& chart) {
  using namespace detail;
  if (chart.series.empty())
    throw MissingArtifactError("figure '" + chart.title + "' has no series");
  for (const Series& s : chart.series) check_series(s);

  const double W = 640, H = 420;
  const double L = 70, R = W - 30, T = 44, B = H - 56;

  double xlo = chart.series[0].x[0], xhi = xlo;
  double ylo = chart.series[0].y[0], yhi = ylo;
  for (const Series& s : chart.series) {
    for (double v : s.x) { xlo = std::min(xlo, v); xhi = std::max(xhi, v); }
    for (double v : s.y) { ylo = std::min(ylo, v); yhi = std::max(yhi, v); }
  }
  const Axis ax = make_axis(xlo, xhi);
  const Axis ay = make_axis(ylo, yhi);

  std::string svg = svg_open(W, H);
  svg += text_at(W / 2, 24, chart.title,
                 std::string(kFont) +
                     " font-size=\"15\" text-anchor=\"middle\" font-weight=\"bold\"");

  for (const auto& [v, label] : axis_ticks(ax)) {
    const double x = ax.map(v, L, R);
    svg += "<line x1=\"" + px(x) + "\" y1=\"" + px(T) + "\" x2=\"" + px(x) +
           "\" y2=\"" + px(B) + "\" stroke=\"#dddddd\"/>\n";
    svg += text_at(x, B + 18, label,
                   std::string(kFont) + " font-size=\"11\" text-anchor=\"middle\"");
  }
  for (const auto& [v, label] : axis_ticks(ay)) {
    const double y = ay.map(v, B, T);
    svg += "<line x1=\"" + px(L) + "\" y1=\"" + px(y) + "\" x2=\"" + px(R) +
           "\" y2=\"" + px(y) + "\" stroke=\"#dddddd\"/>\n";
    svg += text_at(L - 8, y + 4, label,
                   std::string(kFont) + " font-size=\"11\" text-anchor=\"end\"");
  }
  svg += "<rect x=\"" + px(L) + "\" y=\"" + px(T) + "\" width=\"" + px(R - L) +
         "\" height=\"" + px(B - T) + "\" fill=\"none\" stroke=\"#333333\"/>\n";
  svg += text_at((L + R) / 2, H - 14, chart.x_label,
                 std::string(kFont) + " font-size=\"12\" text-anchor=\"middle\"");
  svg += "<text x=\"18\" y=\"" + px((T + B) / 2) + "\" " + kFont +
         " font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         px((T + B) / 2) + ")\">" + xml_escape(chart.y_label) + "</text>\n";

  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const Series& s = chart.series[si];
    const char* color = palette(si);
    if (s.x.size() >= 2) {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        if (i) pts += " ";
        pts += px(ax.map(s.x[i], L, R)) + "," + px(ay.map(s.y[i], B, T));
      }
      svg += std::string("<polyline points=\"") + pts + "\" fill=\"none\" stroke=\"" +
             color + "\" stroke-width=\"1.8\"/>\n";
    }
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg += std::string("<circle cx=\"") + px(ax.map(s.x[i], L, R)) +
             "\" cy=\"" + px(ay.map(s.y[i], B, T)) + "\" r=\"3\" fill=\"" +
             color + "\"/>\n";
  }

  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const double y = T + 10 + 16 * static_cast<double>(si);
    svg += std::string("<rect x=\"") + px(R - 120) + "\" y=\"" + px(y - 8) +
           "\" width=\"12\" height=\"8\" fill=\"" + palette(si) + "\"/>\n";
    svg += text_at(R - 104, y, chart.series[si].name,
                   std::string(kFont) + " font-size=\"11\"");
  }
  svg += "</svg>\n";
  return svg;
}

inline std::string svg_bar_chart(const BarChart& chart) {
  using namespace detail;
  if (chart.groups.empty())
    throw MissingArtifactError("figure '" + chart.title + "' has no groups");
  if (chart.bar_names.empty())
    throw MissingArtifactError("figure '" + chart.title + "' has no bar names");
  double ylo = 0.0, yhi = 0.0;
  for (const BarGroup& g : chart.groups) {
    if (g.values.size() != chart.bar_names.size())
      throw Error("bar group '" + g.label + "' has " +
                  std::to_string(g.values.size()) + " values, expected " +
                  std::to_string(chart.bar_names.size()));
    for (double v : g.values) {
      if (!std::isfinite(v))
        throw Error("bar group '" + g.label + "' has a non-finite value");
      ylo = std::min(ylo, v);
      yhi = std::max(yhi, v);
    }
  }

  const double W = 640, H = 420;
  const double L = 70, R = W - 30, T = 44, B = H - 56;
  const Axis ay = make_axis(ylo, yhi, /*include_zero=*/true);

  std::string svg = svg_open(W, H);
  svg += text_at(W / 2, 24, chart.title,
                 std::string(kFont) +
                     " font-size=\"15\" text-anchor=\"middle\" font-weight=\"bold\"");
  for (const auto& [v, label] : axis_ticks(ay)) {
    const double y = ay.map(v, B, T);
    svg += "<line x1=\"" + px(L) + "\" y1=\"" + px(y) + "\" x2=\"" + px(R) +
           "\" y2=\"" + px(y) + "\" stroke=\"#dddddd\"/>\n";
    svg += text_at(L - 8, y + 4, label,
                   std::string(kFont) + " font-size=\"11\" text-anchor=\"end\"");
  }

  const auto n_groups = static_cast<double>(chart.groups.size());
  const auto n_bars = static_cast<double>(chart.bar_names.size());
  const double group_w = (R - L) / n_groups;
  const double bar_w = group_w / (n_bars + 1.0);
  const double y0 = ay.map(0.0, B, T);

  for (std::size_t gi = 0; gi < chart.groups.size(); ++gi) {
    const BarGroup& g = chart.groups[gi];
    const double gx = L + group_w * static_cast<double>(gi);
    for (std::size_t bi = 0; bi < g.values.size(); ++bi) {
      const double x = gx + bar_w * (0.5 + static_cast<double>(bi));
      const double yv = ay.map(g.values[bi], B, T);
      const double top = std::min(yv, y0);
      svg += std::string("<rect x=\"") + px(x) + "\" y=\"" + px(top) +
             "\" width=\"" + px(bar_w) + "\" height=\"" +
             px(std::abs(yv - y0)) + "\" fill=\"" + palette(bi) + "\"/>\n";
    }
    svg += text_at(gx + group_w / 2, B + 18, g.label,
                   std::string(kFont) + " font-size=\"11\" text-anchor=\"middle\"");
  }
  svg += "<line x1=\"" + px(L) + "\" y1=\"" + px(y0) + "\" x2=\"" + px(R) +
         "\" y2=\"" + px(y0) + "\" stroke=\"#333333\"/>\n";
  svg += "<rect x=\"" + px(L) + "\" y=\"" + px(T) + "\" width=\"" + px(R - L) +
         "\" height=\"" + px(B - T) + "\" fill=\"none\" stroke=\"#333333\"/>\n";
  svg += "<text x=\"18\" y=\"" + px((T + B) / 2) + "\" " + kFont +
         " font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         px((T + B) / 2) + ")\">" + xml_escape(chart.y_label) + "</text>\n";

  for (std::size_t bi = 0; bi < chart.bar_names.size(); ++bi) {
    const double y = T + 10 + 16 * static_cast<double>(bi);
    svg += std::string("<rect x=\"") + px(R - 120) + "\" y=\"" + px(y - 8) +
           "\" width=\"12\" height=\"8\" fill=\"" + palette(bi) + "\"/>\n";
    svg += text_at(R - 104, y, chart.bar_names[bi],
                   std::string(kFont) + " font-size=\"11\"");
  }
  svg += "</svg>\n";
  return svg;
}

inline std::string svg_heatmap(const Heatmap& hm) {
  using namespace detail;
  if (hm.values.empty() || hm.values[0].empty())
    throw MissingArtifactError("figure '" + hm.title + "' has no cells");
  const std::size_t rows = hm.values.size();
  const std::size_t cols = hm.values[0].size();
  if (hm.row_labels.size() != rows || hm.col_labels.size() != cols)
    throw Error("figure '" + hm.title + "' label counts do not match grid");
  double lo = hm.values[0][0], hi = lo;
  for (const auto& row : hm.values) {
    if (row.size() != cols)
      throw Error("figure '" + hm.title + "' has ragged rows");
    for (double v : row) {
      if (!std::isfinite(v))
        throw Error("figure '" + hm.title + "' has a non-finite value");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }

  const double cell = 56;
  const double L = 110, T = 70;
  const double W = L + cell * static_cast<double>(cols) + 30;
  const double H = T + cell * static_cast<double>(rows) + 30;

  std::string svg = svg_open(W, H);
  svg += text_at(W / 2, 24, hm.title,
                 std::string(kFont) +
                     " font-size=\"15\" text-anchor=\"middle\" font-weight=\"bold\"");
  for (std::size_t c = 0; c < cols; ++c)
    svg += text_at(L + cell * (static_cast<double>(c) + 0.5), T - 10,
                   hm.col_labels[c],
                   std::string(kFont) + " font-size=\"11\" text-anchor=\"middle\"");
  for (std::size_t r = 0; r < rows; ++r)
    svg += text_at(L - 8, T + cell * (static_cast<double>(r) + 0.5) + 4,
                   hm.row_labels[r],
                   std::string(kFont) + " font-size=\"11\" text-anchor=\"end\"");

  const double span = hi - lo;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = hm.values[r][c];
      const double t = span > 0.0 ? (v - lo) / span : 0.5;
      const double x = L + cell * static_cast<double>(c);
      const double y = T + cell * static_cast<double>(r);
      svg += std::string("<rect x=\"") + px(x) + "\" y=\"" + px(y) +
             "\" width=\"" + px(cell) + "\" height=\"" + px(cell) +
             "\" fill=\"" + ramp_color(t) + "\" stroke=\"#ffffff\"/>\n";
      svg += text_at(x + cell / 2, y + cell / 2 + 4,
                     decimal_string(std::llround(v * 100.0), -2),
                     std::string(kFont) + " font-size=\"11\" text-anchor=\"middle\"" +
                         (t > 0.55 ? " fill=\"#ffffff\"" : " fill=\"#000000\""));
    }
  }
  svg += "</svg>\n";
  return svg;
}

// The figure set one experiment emits: each entry is (file stem, chart).
struct Report {
  std::vector<std::pair<std::string, LineChart>> line_charts;
  std::vector<std::pair<std::string, BarChart>> bar_charts;
  std::vector<std::pair<std::string, Heatmap>> heatmaps;
};

// Renders every figure, then writes them atomically as <stem>.svg under
// out_dir. All SVGs are rendered before the first write so a bad figure
// leaves no partial file set.
inline std::vector<std::filesystem::path> emit_report(
    const Report& report, const std::filesystem::path& out_dir) {
  std::vector<std::pair<std::filesystem::path, std::string>> files;
  for (const auto& [stem, chart] : report.line_charts)
    files.emplace_back(out_dir / (stem + ".svg"), svg_line_chart(chart));
  for (const auto& [stem, chart] : report.bar_charts)
    files.emplace_back(out_dir / (stem + ".svg"), svg_bar_chart(chart));
  for (const auto& [stem, hm] : report.heatmaps)
    files.emplace_back(out_dir / (stem + ".svg"), svg_heatmap(hm));
  std::vector<std::filesystem::path> out;
  for (const auto& [path, content] : files) {
    atomic_write_file(path, content);
    out.push_back(path);
  }
  return out;
}

}  // namespace toponav
