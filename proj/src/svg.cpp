#include "countcast/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "countcast/errors.hpp"

namespace countcast {

namespace {

constexpr double kWidth = 900.0;
constexpr double kPanelHeight = 220.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 34.0;
constexpr double kMarginBottom = 30.0;

std::string fixed(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string compact(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string escape_text(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Scale {
    double day_min = 0.0, day_span = 1.0;
    double val_min = 0.0, val_span = 1.0;
    double top = 0.0;

    double x(double day) const {
        return kMarginLeft + (day - day_min) / day_span * (kWidth - kMarginLeft - kMarginRight);
    }
    double y(double value) const {
        const double height = kPanelHeight - kMarginTop - kMarginBottom;
        return top + kMarginTop + height - (value - val_min) / val_span * height;
    }
};

// Consecutive runs of defined days, so gaps break the line and the band.
std::vector<std::pair<size_t, size_t>> defined_runs(const PlotPanel& panel) {
    std::vector<std::pair<size_t, size_t>> runs;
    size_t i = 0;
    const size_t n = panel.days.size();
    while (i < n) {
        if (!panel.defined[i]) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j + 1 < n && panel.defined[j + 1]) ++j;
        runs.emplace_back(i, j);
        i = j + 1;
    }
    return runs;
}

void render_panel(std::ostringstream& svg, const PlotPanel& panel, double top) {
    Scale sc;
    sc.top = top;

    double day_lo = 0.0, day_hi = 1.0;
    double val_lo = 0.0, val_hi = 1.0;
    bool any = false;
    auto grow = [&](double day, double value) {
        if (std::isnan(value)) return;
        if (!any) {
            day_lo = day_hi = day;
            val_lo = val_hi = value;
            any = true;
            return;
        }
        day_lo = std::min(day_lo, day);
        day_hi = std::max(day_hi, day);
        val_lo = std::min(val_lo, value);
        val_hi = std::max(val_hi, value);
    };
    for (size_t i = 0; i < panel.days.size(); ++i) {
        if (!panel.defined[i]) continue;
        const auto day = static_cast<double>(panel.days[i]);
        grow(day, panel.lower[i]);
        grow(day, panel.upper[i]);
        grow(day, panel.mean[i]);
    }
    for (const auto& [day, value] : panel.observed) grow(static_cast<double>(day), value);

    if (val_lo > 0.0) val_lo = 0.0;  // counts read best anchored at zero
    sc.day_min = day_lo;
    sc.day_span = std::max(day_hi - day_lo, 1.0);
    sc.val_min = val_lo;
    sc.val_span = std::max(val_hi - val_lo, 1e-9);

    const double plot_left = kMarginLeft;
    const double plot_right = kWidth - kMarginRight;
    const double plot_top = top + kMarginTop;
    const double plot_bottom = top + kPanelHeight - kMarginBottom;

    svg << "<text x=\"" << fixed(plot_left) << "\" y=\"" << fixed(top + 22.0)
        << "\" font-size=\"13\" font-family=\"sans-serif\" fill=\"#222\">"
        << escape_text(panel.title) << "</text>\n";

    // Frame and horizontal ticks.
    svg << "<rect x=\"" << fixed(plot_left) << "\" y=\"" << fixed(plot_top) << "\" width=\""
        << fixed(plot_right - plot_left) << "\" height=\"" << fixed(plot_bottom - plot_top)
        << "\" fill=\"none\" stroke=\"#999\" stroke-width=\"1\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double frac = static_cast<double>(t) / 4.0;
        const double value = sc.val_min + frac * sc.val_span;
        const double yy = sc.y(value);
        if (t > 0 && t < 4) {
            svg << "<line x1=\"" << fixed(plot_left) << "\" y1=\"" << fixed(yy) << "\" x2=\""
                << fixed(plot_right) << "\" y2=\"" << fixed(yy)
                << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
        }
        svg << "<text x=\"" << fixed(plot_left - 6.0) << "\" y=\"" << fixed(yy + 4.0)
            << "\" font-size=\"10\" font-family=\"sans-serif\" fill=\"#555\" text-anchor=\"end\">"
            << compact(value) << "</text>\n";
    }
    for (int t = 0; t <= 4; ++t) {
        const double frac = static_cast<double>(t) / 4.0;
        const double day = sc.day_min + frac * sc.day_span;
        const double xx = sc.x(day);
        svg << "<text x=\"" << fixed(xx) << "\" y=\"" << fixed(plot_bottom + 14.0)
            << "\" font-size=\"10\" font-family=\"sans-serif\" fill=\"#555\" "
               "text-anchor=\"middle\">day "
            << compact(std::round(day)) << "</text>\n";
    }

    for (const auto& [first, last] : defined_runs(panel)) {
        if (last > first) {
            // Band polygon: upper edge left to right, lower edge back.
            svg << "<polygon fill=\"#a6c8e8\" fill-opacity=\"0.55\" stroke=\"none\" points=\"";
            for (size_t i = first; i <= last; ++i) {
                svg << fixed(sc.x(static_cast<double>(panel.days[i]))) << ','
                    << fixed(sc.y(panel.upper[i])) << ' ';
            }
            for (size_t i = last + 1; i-- > first;) {
                svg << fixed(sc.x(static_cast<double>(panel.days[i]))) << ','
                    << fixed(sc.y(panel.lower[i]));
                if (i != first) svg << ' ';
            }
            svg << "\"/>\n";
            svg << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\" points=\"";
            for (size_t i = first; i <= last; ++i) {
                svg << fixed(sc.x(static_cast<double>(panel.days[i]))) << ','
                    << fixed(sc.y(panel.mean[i]));
                if (i != last) svg << ' ';
            }
            svg << "\"/>\n";
        } else {
            // A lone defined day renders as a vertical interval plus a dot.
            const double xx = sc.x(static_cast<double>(panel.days[first]));
            svg << "<line x1=\"" << fixed(xx) << "\" y1=\"" << fixed(sc.y(panel.lower[first]))
                << "\" x2=\"" << fixed(xx) << "\" y2=\"" << fixed(sc.y(panel.upper[first]))
                << "\" stroke=\"#a6c8e8\" stroke-width=\"2\"/>\n";
            svg << "<circle cx=\"" << fixed(xx) << "\" cy=\"" << fixed(sc.y(panel.mean[first]))
                << "\" r=\"2\" fill=\"#1f5fa8\"/>\n";
        }
    }

    for (const auto& [day, value] : panel.observed) {
        svg << "<circle cx=\"" << fixed(sc.x(static_cast<double>(day))) << "\" cy=\""
            << fixed(sc.y(value)) << "\" r=\"2\" fill=\"#333\"/>\n";
    }
}

}  // namespace

std::string render_plot_svg(const std::string& title, const std::vector<PlotPanel>& panels) {
    if (panels.empty()) throw UsageError("a plot needs at least one panel");
    const double height = kPanelHeight * static_cast<double>(panels.size()) + 26.0;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << compact(kWidth)
        << "\" height=\"" << compact(height) << "\" viewBox=\"0 0 " << compact(kWidth) << ' '
        << compact(height) << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << fixed(kWidth / 2.0)
        << "\" y=\"18\" font-size=\"15\" font-family=\"sans-serif\" fill=\"#111\" "
           "text-anchor=\"middle\">"
        << escape_text(title) << "</text>\n";
    for (size_t i = 0; i < panels.size(); ++i) {
        render_panel(svg, panels[i], 26.0 + kPanelHeight * static_cast<double>(i));
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_plot_svg_file(const std::string& title, const std::vector<PlotPanel>& panels,
                         const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open file for writing: " + path);
    const std::string body = render_plot_svg(title, panels);
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!out) throw DataError("failed writing plot: " + path);
}

}  // namespace countcast
