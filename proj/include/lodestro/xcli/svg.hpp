#pragma once

// Static SVG emitters: a log-scale line chart and a cell heatmap. No
// scripting, no external resources.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace lodestro::xcli::svg {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
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

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// y on a log10 axis; nonpositive or non-finite points are skipped.
inline std::string line_chart_log(const std::string& title, const std::string& x_label, const std::string& y_label,
                                  const std::vector<Series>& series) {
    constexpr double width = 640, height = 420, left = 70, right = 20, top = 40, bottom = 50;
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!(s.y[i] > 0.0) || !std::isfinite(s.y[i]) || !std::isfinite(s.x[i])) continue;
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            y_lo = std::min(y_lo, std::log10(s.y[i]));
            y_hi = std::max(y_hi, std::log10(s.y[i]));
        }
    }
    if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
    if (x_hi == x_lo) x_hi = x_lo + 1;
    y_lo = std::floor(y_lo);
    y_hi = std::ceil(y_hi);
    if (y_hi == y_lo) y_hi = y_lo + 1;
    const double pw = width - left - right, ph = height - top - bottom;
    auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * pw; };
    auto py = [&](double ly) { return top + (y_hi - ly) / (y_hi - y_lo) * ph; };

    static constexpr std::array<const char*, 6> colors = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                                          "#17becf"};
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    o << "<metadata>x_range=" << num(x_lo) << ":" << num(x_hi) << " log10_y_range=" << num(y_lo) << ":"
      << num(y_hi) << "</metadata>\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double ly = y_lo; ly <= y_hi; ly += 1.0) {
        o << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << num(py(ly)) << "\" y2=\""
          << num(py(ly)) << "\" stroke=\"#ddd\"/>\n";
        o << "<text x=\"" << left - 6 << "\" y=\"" << num(py(ly) + 4) << "\" text-anchor=\"end\" font-size=\"11\">1e"
          << static_cast<int>(ly) << "</text>\n";
    }
    for (int t = 0; t <= 5; ++t) {
        const double x = x_lo + (x_hi - x_lo) * t / 5.0;
        o << "<text x=\"" << num(px(x)) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
          << num(x) << "</text>\n";
    }
    o << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << escape(x_label) << "</text>\n";
    o << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << top + ph / 2 << ")\">" << escape(y_label) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        o << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << colors[k % colors.size()] << "\" points=\"";
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!(s.y[i] > 0.0) || !std::isfinite(s.y[i])) continue;
            o << num(px(s.x[i])) << "," << num(py(std::log10(s.y[i]))) << " ";
        }
        o << "\"/>\n";
        o << "<text x=\"" << left + pw - 4 << "\" y=\"" << top + 14 + 14 * k << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
          << colors[k % colors.size()] << "\">" << escape(s.label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

/// Perceptually ordered ramp (dark blue to yellow).
inline std::string ramp(double t) {
    static constexpr std::array<std::array<double, 3>, 5> stops = {{{68, 1, 84},
                                                                     {59, 82, 139},
                                                                     {33, 145, 140},
                                                                     {94, 201, 98},
                                                                     {253, 231, 37}}};
    t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
    const auto i = std::min(static_cast<std::size_t>(t), stops.size() - 2);
    const double f = t - static_cast<double>(i);
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]))),
                  static_cast<int>(std::lround(stops[i][1] + f * (stops[i + 1][1] - stops[i][1]))),
                  static_cast<int>(std::lround(stops[i][2] + f * (stops[i + 1][2] - stops[i][2]))));
    return buf;
}

/// values[row][col]; empty optionals render as blank cells. The colour range
/// is auto-scaled to the present values and recorded in <metadata>.
inline std::string heatmap(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<double>& x_ticks, const std::vector<double>& y_ticks,
                           const std::vector<std::vector<std::optional<double>>>& values) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& row : values) {
        for (const auto& v : row) {
            if (v) lo = std::min(lo, *v), hi = std::max(hi, *v);
        }
    }
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    const double cell = 28, left = 60, top = 40;
    const double w = left + cell * static_cast<double>(x_ticks.size()) + 20;
    const double h = top + cell * static_cast<double>(y_ticks.size()) + 50;
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    o << "<metadata>color_range=" << num(lo) << ":" << num(hi) << "</metadata>\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
    for (std::size_t r = 0; r < y_ticks.size(); ++r) {
        const double y = top + cell * static_cast<double>(y_ticks.size() - 1 - r);
        o << "<text x=\"" << left - 6 << "\" y=\"" << y + cell * 0.65 << "\" text-anchor=\"end\" font-size=\"10\">"
          << num(y_ticks[r]) << "</text>\n";
        for (std::size_t c = 0; c < x_ticks.size(); ++c) {
            const double x = left + cell * static_cast<double>(c);
            const bool present = r < values.size() && c < values[r].size() && values[r][c].has_value();
            const double v = present ? values[r][c].value() : 0.0;
            o << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
              << "\" stroke=\"#eee\" fill=\"" << (present ? ramp(hi > lo ? (v - lo) / (hi - lo) : 0.0) : "white")
              << "\"/>\n";
            if (present) {
                o << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell * 0.65
                  << "\" text-anchor=\"middle\" font-size=\"8\" fill=\"white\">" << num(v) << "</text>\n";
            }
        }
    }
    const double base = top + cell * static_cast<double>(y_ticks.size());
    for (std::size_t c = 0; c < x_ticks.size(); ++c) {
        o << "<text x=\"" << left + cell * (static_cast<double>(c) + 0.5) << "\" y=\"" << base + 14
          << "\" text-anchor=\"middle\" font-size=\"9\">" << num(x_ticks[c]) << "</text>\n";
    }
    o << "<text x=\"" << left + cell * static_cast<double>(x_ticks.size()) / 2 << "\" y=\"" << base + 36
      << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(x_label) << "</text>\n";
    o << "<text x=\"14\" y=\"" << top + cell * static_cast<double>(y_ticks.size()) / 2
      << "\" font-size=\"12\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

}  // namespace lodestro::xcli::svg
