#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rcm/error.hpp"

namespace rcm {

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
    bool markers = true;
    bool line = true;
    bool dashed = false;
};

struct PlotOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
    int width = 640;
    int height = 420;
};

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string escape_xml(const std::string& s) {
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

inline constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace detail

/// Self-contained line/scatter plot. Output depends only on the input.
inline std::string render_svg(const std::vector<PlotSeries>& series, const PlotOptions& opt = {}) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    std::size_t count = 0;
    for (const auto& s : series)
        for (auto [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y))
                throw ArgumentError("experiments_cli", "non-finite value in series '" + s.label + "'");
            if (opt.log_y && !(y > 0.0))
                throw ArgumentError("experiments_cli", "log scale needs positive values in series '" + s.label + "'");
            const double ty = opt.log_y ? std::log10(y) : y;
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, ty);
            y1 = std::max(y1, ty);
            ++count;
        }
    if (count == 0) throw ArgumentError("experiments_cli", "nothing to plot");
    if (x1 == x0) {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if (y1 == y0) {
        y0 -= 1.0;
        y1 += 1.0;
    }

    const double left = 70, right = 150, top = 40, bottom = 50;
    const double pw = opt.width - left - right;
    const double ph = opt.height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + ph - ((opt.log_y ? std::log10(y) : y) - y0) / (y1 - y0) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!opt.title.empty())
        os << "<text x=\"" << detail::fmt(left + pw / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
           << detail::escape_xml(opt.title) << "</text>\n";
    os << "<rect x=\"" << detail::fmt(left) << "\" y=\"" << detail::fmt(top) << "\" width=\"" << detail::fmt(pw)
       << "\" height=\"" << detail::fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int i = 0; i <= 4; ++i) {
        const double fx = x0 + (x1 - x0) * i / 4.0;
        const double fy = y0 + (y1 - y0) * i / 4.0;
        const double sx = px(fx);
        const double sy = top + ph - (fy - y0) / (y1 - y0) * ph;
        os << "<text x=\"" << detail::fmt(sx) << "\" y=\"" << detail::fmt(top + ph + 16)
           << "\" text-anchor=\"middle\">" << detail::tick_label(fx) << "</text>\n";
        os << "<text x=\"" << detail::fmt(left - 6) << "\" y=\"" << detail::fmt(sy + 4) << "\" text-anchor=\"end\">"
           << detail::tick_label(opt.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
    }
    if (!opt.x_label.empty())
        os << "<text x=\"" << detail::fmt(left + pw / 2) << "\" y=\"" << opt.height - 10 << "\" text-anchor=\"middle\">"
           << detail::escape_xml(opt.x_label) << "</text>\n";
    if (!opt.y_label.empty())
        os << "<text transform=\"translate(16," << detail::fmt(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
           << detail::escape_xml(opt.y_label) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        const char* colour = detail::kPalette[i % std::size(detail::kPalette)];
        if (s.line && s.points.size() > 1) {
            os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\"";
            if (s.dashed) os << " stroke-dasharray=\"6,4\"";
            os << " points=\"";
            for (std::size_t p = 0; p < s.points.size(); ++p)
                os << (p ? " " : "") << detail::fmt(px(s.points[p].first)) << ',' << detail::fmt(py(s.points[p].second));
            os << "\"/>\n";
        }
        if (s.markers)
            for (auto [x, y] : s.points)
                os << "<circle cx=\"" << detail::fmt(px(x)) << "\" cy=\"" << detail::fmt(py(y)) << "\" r=\"3\" fill=\""
                   << colour << "\"/>\n";
        const double ly = top + 16 + 18.0 * static_cast<double>(i);
        os << "<line x1=\"" << detail::fmt(left + pw + 10) << "\" y1=\"" << detail::fmt(ly) << "\" x2=\""
           << detail::fmt(left + pw + 30) << "\" y2=\"" << detail::fmt(ly) << "\" stroke=\"" << colour << "\"";
        if (s.dashed) os << " stroke-dasharray=\"6,4\"";
        os << "/>\n<text x=\"" << detail::fmt(left + pw + 35) << "\" y=\"" << detail::fmt(ly + 4) << "\">"
           << detail::escape_xml(s.label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline void emit_svg(const std::string& path, const std::vector<PlotSeries>& series, const PlotOptions& opt = {}) {
    const std::string text = render_svg(series, opt);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("experiments_cli", "cannot write " + path);
    out << text;
}

}  // namespace rcm
