#pragma once

// Self-contained SVG plot writer for the experiment outputs. CSV files carry
// the numbers; these plots are a convenience view, so the feature set is
// deliberately small: scatter, polyline with optional error bars, and bars.

#include <string>
#include <vector>

namespace tea {

struct SvgSeries {
    enum class Style { Points, Line, Bars };
    std::string name;
    Style style = Style::Line;
    std::string color = "#1f77b4";
    bool dashed = false;
    std::vector<double> xs;
    std::vector<double> ys;
    std::vector<double> yerr;  // empty, or one entry per point
    double bar_width = 0.0;    // data units, Bars only
};

class SvgPlot {
public:
    SvgPlot(std::string title, std::string xlabel, std::string ylabel);
    void add(SvgSeries series);
    void write(const std::string& path) const;

private:
    std::string title_;
    std::string xlabel_;
    std::string ylabel_;
    std::vector<SvgSeries> series_;
};

// stable palette for indexed series
std::string svg_color(std::size_t i);

}  // namespace tea
