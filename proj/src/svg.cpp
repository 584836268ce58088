#include "tea/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace tea {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out.push_back(c);
    }
    return out;
}

struct Range {
    double lo = 0.0;
    double hi = 1.0;

    void expand(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
};

}  // namespace

std::string svg_color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    return palette[i % (sizeof palette / sizeof palette[0])];
}

SvgPlot::SvgPlot(std::string title, std::string xlabel, std::string ylabel)
    : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

void SvgPlot::add(SvgSeries series) {
    if (series.xs.size() != series.ys.size())
        throw std::invalid_argument("SvgPlot: x/y length mismatch");
    if (!series.yerr.empty() && series.yerr.size() != series.ys.size())
        throw std::invalid_argument("SvgPlot: yerr length mismatch");
    series_.push_back(std::move(series));
}

void SvgPlot::write(const std::string& path) const {
    bool seeded = false;
    Range xr, yr;
    for (const SvgSeries& s : series_) {
        for (std::size_t i = 0; i < s.xs.size(); ++i) {
            if (!std::isfinite(s.xs[i]) || !std::isfinite(s.ys[i])) continue;
            const double e = s.yerr.empty() ? 0.0 : s.yerr[i];
            if (!seeded) {
                xr.lo = xr.hi = s.xs[i];
                yr.lo = yr.hi = s.ys[i];
                seeded = true;
            }
            xr.expand(s.xs[i] - (s.style == SvgSeries::Style::Bars ? 0.5 * s.bar_width : 0.0));
            xr.expand(s.xs[i] + (s.style == SvgSeries::Style::Bars ? 0.5 * s.bar_width : 0.0));
            yr.expand(s.ys[i] - e);
            yr.expand(s.ys[i] + e);
            if (s.style == SvgSeries::Style::Bars) yr.expand(0.0);
        }
    }
    if (xr.hi <= xr.lo) {
        xr.lo -= 1.0;
        xr.hi += 1.0;
    }
    if (yr.hi <= yr.lo) {
        yr.lo -= 1.0;
        yr.hi += 1.0;
    }
    const double xpad = 0.05 * (xr.hi - xr.lo);
    const double ypad = 0.05 * (yr.hi - yr.lo);
    xr.lo -= xpad;
    xr.hi += xpad;
    yr.lo -= ypad;
    yr.hi += ypad;

    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    const auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    const auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("SvgPlot: cannot open '" + path + "'");
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth) << "\" height=\""
        << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << " " << fmt(kHeight) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\">"
        << escape(title_) << "</text>\n";

    // axes
    out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft)
        << "\" y2=\"" << fmt(kTop + ph) << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\""
        << fmt(kLeft + pw) << "\" y2=\"" << fmt(kTop + ph) << "\" stroke=\"black\"/>\n";

    for (int t = 0; t <= 4; ++t) {
        const double fx = xr.lo + (xr.hi - xr.lo) * t / 4.0;
        const double fy = yr.lo + (yr.hi - yr.lo) * t / 4.0;
        out << "<line x1=\"" << fmt(px(fx)) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\""
            << fmt(px(fx)) << "\" y2=\"" << fmt(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << fmt(px(fx)) << "\" y=\"" << fmt(kTop + ph + 18)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << tick_label(fx) << "</text>\n";
        out << "<line x1=\"" << fmt(kLeft - 5) << "\" y1=\"" << fmt(py(fy)) << "\" x2=\""
            << fmt(kLeft) << "\" y2=\"" << fmt(py(fy)) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(py(fy) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << tick_label(fy) << "</text>\n";
    }
    out << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 10)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << escape(xlabel_) << "</text>\n";
    out << "<text x=\"16\" y=\"" << fmt(kTop + ph / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
           "transform=\"rotate(-90 16 "
        << fmt(kTop + ph / 2) << ")\">" << escape(ylabel_) << "</text>\n";

    for (const SvgSeries& s : series_) {
        const std::string dash = s.dashed ? " stroke-dasharray=\"6 4\"" : "";
        if (s.style == SvgSeries::Style::Bars) {
            const double w = std::fabs(px(s.bar_width) - px(0.0));
            for (std::size_t i = 0; i < s.xs.size(); ++i) {
                if (!std::isfinite(s.ys[i])) continue;
                const double x0 = px(s.xs[i]) - 0.5 * w;
                const double y0 = py(std::max(s.ys[i], 0.0));
                const double hgt = std::fabs(py(0.0) - py(s.ys[i]));
                out << "<rect x=\"" << fmt(x0) << "\" y=\"" << fmt(y0) << "\" width=\"" << fmt(w)
                    << "\" height=\"" << fmt(hgt) << "\" fill=\"" << s.color
                    << "\" fill-opacity=\"0.7\"/>\n";
            }
        } else if (s.style == SvgSeries::Style::Line) {
            std::string pts;
            for (std::size_t i = 0; i < s.xs.size(); ++i) {
                if (!std::isfinite(s.ys[i])) continue;
                pts += fmt(px(s.xs[i])) + "," + fmt(py(s.ys[i])) + " ";
            }
            out << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << s.color
                << "\" stroke-width=\"1.5\"" << dash << "/>\n";
        }
        if (s.style != SvgSeries::Style::Bars) {
            for (std::size_t i = 0; i < s.xs.size(); ++i) {
                if (!std::isfinite(s.ys[i])) continue;
                out << "<circle cx=\"" << fmt(px(s.xs[i])) << "\" cy=\"" << fmt(py(s.ys[i]))
                    << "\" r=\"" << (s.style == SvgSeries::Style::Points ? "2.4" : "3") << "\" fill=\""
                    << s.color << "\"/>\n";
                if (!s.yerr.empty() && std::isfinite(s.yerr[i]) && s.yerr[i] > 0.0) {
                    const double ylo = py(s.ys[i] - s.yerr[i]);
                    const double yhi = py(s.ys[i] + s.yerr[i]);
                    const double cx = px(s.xs[i]);
                    out << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(ylo) << "\" x2=\""
                        << fmt(cx) << "\" y2=\"" << fmt(yhi) << "\" stroke=\"" << s.color
                        << "\"/>\n";
                    out << "<line x1=\"" << fmt(cx - 3) << "\" y1=\"" << fmt(ylo) << "\" x2=\""
                        << fmt(cx + 3) << "\" y2=\"" << fmt(ylo) << "\" stroke=\"" << s.color
                        << "\"/>\n";
                    out << "<line x1=\"" << fmt(cx - 3) << "\" y1=\"" << fmt(yhi) << "\" x2=\""
                        << fmt(cx + 3) << "\" y2=\"" << fmt(yhi) << "\" stroke=\"" << s.color
                        << "\"/>\n";
                }
            }
        }
    }

    // legend, top right of the plot area
    double ly = kTop + 8.0;
    for (const SvgSeries& s : series_) {
        if (s.name.empty()) continue;
        const double lx = kLeft + pw - 150.0;
        out << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly + 4) << "\" x2=\"" << fmt(lx + 22)
            << "\" y2=\"" << fmt(ly + 4) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\""
            << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
        out << "<text x=\"" << fmt(lx + 28) << "\" y=\"" << fmt(ly + 8)
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(s.name) << "</text>\n";
        ly += 16.0;
    }
    out << "</svg>\n";
}

}  // namespace tea
