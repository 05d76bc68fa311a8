#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>

namespace lqlab::experiment {

struct Series {
    std::string label;
    std::string color;
    std::span<const double> x;
    std::span<const double> y;
};

namespace detail {

inline std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace detail

/// Static line plot of `learned` over `analytic` (blue and orange), with a
/// legend and five ticks per axis. Non-finite points are skipped.
inline std::string overlay_plot_svg(const std::string& title, const std::string& x_label,
                                    std::span<const double> x, std::span<const double> learned,
                                    std::span<const double> analytic) {
    constexpr double width = 640, height = 400, left = 70, right = 20, top = 40, bottom = 50;
    const Series series[] = {{"learned", "#1f77b4", x, learned}, {"analytic", "#ff7f0e", x, analytic}};

    double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            y_lo = std::min(y_lo, s.y[i]);
            y_hi = std::max(y_hi, s.y[i]);
        }
    }
    if (!(x_lo < x_hi)) x_lo = 0, x_hi = 1;
    if (!(y_lo < y_hi)) y_lo -= 1, y_hi += 1;

    const auto px = [&](double v) { return left + (v - x_lo) / (x_hi - x_lo) * (width - left - right); };
    const auto py = [&](double v) { return height - bottom - (v - y_lo) / (y_hi - y_lo) * (height - top - bottom); };
    using detail::fixed;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
    svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    svg += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" + title + "</text>\n";
    svg += "<rect x=\"" + fixed(left) + "\" y=\"" + fixed(top) + "\" width=\"" + fixed(width - left - right) +
           "\" height=\"" + fixed(height - top - bottom) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x_lo + (x_hi - x_lo) * k / 4.0;
        const double yv = y_lo + (y_hi - y_lo) * k / 4.0;
        svg += "<text x=\"" + fixed(px(xv)) + "\" y=\"" + fixed(height - bottom + 18) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + fixed(xv) + "</text>\n";
        svg += "<text x=\"" + fixed(left - 6) + "\" y=\"" + fixed(py(yv) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + fixed(yv, 3) + "</text>\n";
    }
    svg += "<text x=\"" + fixed(left + (width - left - right) / 2) + "\" y=\"" + fixed(height - 10) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + x_label + "</text>\n";
    for (const auto& s : series) {
        svg += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            svg += (first ? "" : " ") + fixed(px(s.x[i])) + "," + fixed(py(s.y[i]));
            first = false;
        }
        svg += "\"/>\n";
    }
    for (int k = 0; k < 2; ++k) {
        const double y = top + 16 + 18 * k;
        svg += "<line x1=\"" + fixed(left + 12) + "\" y1=\"" + fixed(y) + "\" x2=\"" + fixed(left + 36) + "\" y2=\"" +
               fixed(y) + "\" stroke=\"" + series[k].color + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + fixed(left + 42) + "\" y=\"" + fixed(y + 4) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + series[k].label + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << text;
}

}  // namespace lqlab::experiment
