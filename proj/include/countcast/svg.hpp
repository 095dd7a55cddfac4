#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace countcast {

// One chart panel: a shaded band between lower and upper, a mean polyline,
// and optional observed points. Days where defined is 0 leave gaps.
struct PlotPanel {
    std::string title;
    std::vector<std::int64_t> days;
    std::vector<double> mean, lower, upper;
    std::vector<std::uint8_t> defined;
    std::vector<std::pair<std::int64_t, double>> observed;
};

// Static SVG with the panels stacked vertically. Output is byte-deterministic:
// fixed-precision coordinates, no timestamps, no external references.
std::string render_plot_svg(const std::string& title, const std::vector<PlotPanel>& panels);
void write_plot_svg_file(const std::string& title, const std::vector<PlotPanel>& panels,
                         const std::string& path);

}  // namespace countcast
