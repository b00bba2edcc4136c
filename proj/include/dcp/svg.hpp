#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "csv.hpp"

namespace dcp {

struct PlotSeries {
  std::string label;
  std::vector<double> values;  // one per x tick, NaN = missing
  std::vector<double> errors;  // symmetric bar half-heights
};

namespace detail {

inline double nice_step(double span) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / 4.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double frac = raw / mag;
  double nice = 10.0;
  if (frac <= 1.0)
    nice = 1.0;
  else if (frac <= 2.0)
    nice = 2.0;
  else if (frac <= 5.0)
    nice = 5.0;
  return nice * mag;
}

}  // namespace detail

// Dot-and-error-bar chart over categorical x positions. Self-contained SVG,
// no external assets.
inline void write_errorbar_svg(std::ostream& out, const std::string& title,
                               const std::string& y_label,
                               const std::vector<std::string>& x_ticks,
                               const std::vector<PlotSeries>& series,
                               std::optional<double> reference_line = std::nullopt) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#ff7f0e", "#9467bd", "#8c564b"};
  const double width = 640, height = 420;
  const double left = 64, right = 150, top = 40, bottom = 48;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double lo = reference_line ? *reference_line : kInf;
  double hi = reference_line ? *reference_line : -kInf;
  for (const PlotSeries& s : series)
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (!std::isfinite(s.values[i])) continue;
      const double e = i < s.errors.size() && std::isfinite(s.errors[i]) ? s.errors[i] : 0.0;
      lo = std::min(lo, s.values[i] - e);
      hi = std::max(hi, s.values[i] + e);
    }
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.08 * (hi - lo);
  lo -= pad;
  hi += pad;

  const auto xpos = [&](std::size_t i, std::size_t s_idx) {
    const double slot = plot_w / static_cast<double>(x_ticks.size());
    const double dodge = (static_cast<double>(s_idx) -
                          static_cast<double>(series.size() - 1) / 2.0) *
                         std::min(10.0, slot / 8.0);
    return left + slot * (static_cast<double>(i) + 0.5) + dodge;
  };
  const auto ypos = [&](double v) { return top + plot_h * (1.0 - (v - lo) / (hi - lo)); };

  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
      << "' viewBox='0 0 " << width << " " << height << "'>\n";
  out << "<rect width='" << width << "' height='" << height << "' fill='white'/>\n";
  out << "<text x='" << left << "' y='24' font-family='sans-serif' font-size='15' "
         "font-weight='bold'>"
      << title << "</text>\n";

  // Axes and y ticks.
  const double step = detail::nice_step(hi - lo);
  const double first_tick = std::ceil(lo / step) * step;
  out << "<line x1='" << left << "' y1='" << top << "' x2='" << left << "' y2='"
      << top + plot_h << "' stroke='black'/>\n";
  out << "<line x1='" << left << "' y1='" << top + plot_h << "' x2='" << left + plot_w
      << "' y2='" << top + plot_h << "' stroke='black'/>\n";
  for (double v = first_tick; v <= hi + 1e-12 * step; v += step) {
    const double y = ypos(v);
    out << "<line x1='" << left - 4 << "' y1='" << y << "' x2='" << left + plot_w << "' y2='"
        << y << "' stroke='#dddddd'/>\n";
    out << "<text x='" << left - 8 << "' y='" << y + 4
        << "' text-anchor='end' font-family='sans-serif' font-size='11'>"
        << format_double(v, "%.4g") << "</text>\n";
  }
  for (std::size_t i = 0; i < x_ticks.size(); ++i) {
    const double x = left + plot_w * (static_cast<double>(i) + 0.5) /
                                static_cast<double>(x_ticks.size());
    out << "<text x='" << x << "' y='" << top + plot_h + 18
        << "' text-anchor='middle' font-family='sans-serif' font-size='12'>" << x_ticks[i]
        << "</text>\n";
  }
  out << "<text x='" << left + plot_w / 2 << "' y='" << height - 10
      << "' text-anchor='middle' font-family='sans-serif' font-size='12'>grid size M</text>\n";
  out << "<text x='16' y='" << top + plot_h / 2
      << "' text-anchor='middle' font-family='sans-serif' font-size='12' transform='rotate(-90 "
         "16 "
      << top + plot_h / 2 << ")'>" << y_label << "</text>\n";

  if (reference_line) {
    const double y = ypos(*reference_line);
    out << "<line x1='" << left << "' y1='" << y << "' x2='" << left + plot_w << "' y2='" << y
        << "' stroke='#888888' stroke-dasharray='6,4'/>\n";
  }

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % 6];
    for (std::size_t i = 0; i < series[s].values.size() && i < x_ticks.size(); ++i) {
      const double v = series[s].values[i];
      if (!std::isfinite(v)) continue;
      const double x = xpos(i, s);
      const double e =
          i < series[s].errors.size() && std::isfinite(series[s].errors[i])
              ? series[s].errors[i]
              : 0.0;
      if (e > 0.0) {
        out << "<line x1='" << x << "' y1='" << ypos(v - e) << "' x2='" << x << "' y2='"
            << ypos(v + e) << "' stroke='" << color << "' stroke-width='1.5'/>\n";
        for (double end : {v - e, v + e})
          out << "<line x1='" << x - 4 << "' y1='" << ypos(end) << "' x2='" << x + 4
              << "' y2='" << ypos(end) << "' stroke='" << color << "' stroke-width='1.5'/>\n";
      }
      out << "<circle cx='" << x << "' cy='" << ypos(v) << "' r='3.5' fill='" << color
          << "'/>\n";
    }
    const double ly = top + 16 + 18 * static_cast<double>(s);
    out << "<circle cx='" << left + plot_w + 16 << "' cy='" << ly - 4 << "' r='4' fill='"
        << color << "'/>\n";
    out << "<text x='" << left + plot_w + 26 << "' y='" << ly
        << "' font-family='sans-serif' font-size='12'>" << series[s].label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace dcp
