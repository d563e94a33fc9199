#pragma once

// SVG rendering of a (deformed) linkage mesh.
//
// Cells are filled with a fixed five-stop color ramp (dark purple -> blue -> teal -> green ->
// yellow) linearly mapped from the minimum to the maximum of the plotted diagnostic, and the
// legend prints both ends. Without a diagnostic, cells are a uniform light gray. Bars are black
// segments; handle targets are hollow blue circles, achieved handle positions small red squares.
// All numbers are printed with fixed precision, so output bytes depend only on the input.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "morphkit/mesh.hpp"

namespace morphkit {

struct Rgb {
    int r = 0, g = 0, b = 0;
};

inline constexpr std::array<Rgb, 5> kColorRamp{{{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};

/// Linear interpolation along kColorRamp, t clamped to [0, 1].
inline Rgb ramp_color(double t) {
    t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
    const double x = t * (kColorRamp.size() - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(x), kColorRamp.size() - 2);
    const double f = x - static_cast<double>(i);
    auto mix = [&](int a, int b) { return static_cast<int>(std::lround(a + (b - a) * f)); };
    return {mix(kColorRamp[i].r, kColorRamp[i + 1].r), mix(kColorRamp[i].g, kColorRamp[i + 1].g),
            mix(kColorRamp[i].b, kColorRamp[i + 1].b)};
}

inline std::string hex(const Rgb& c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

struct RenderMarker {
    Vec2 target;
    std::optional<Vec2> achieved;
};

struct RenderInput {
    MeshTable mesh;
    std::vector<double> cell_values; // one per cell, empty for uniform fill
    std::string value_label;         // legend caption, e.g. "dissimilarity (mm)"
    std::vector<RenderMarker> markers;
    double px_per_mm = 20.0;
};

namespace detail {
inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s = buf;
    if (s == "-0.000") s = "0.000";
    return s;
}
inline std::string xml_escape(const std::string& in) {
    std::string out;
    for (char ch : in) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}
inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}
}  // namespace detail

inline void render_svg(std::ostream& os, const RenderInput& in) {
    using detail::num;
    const MeshTable& mesh = in.mesh;
    const std::vector<Vec2>& pos = mesh.positions;
    if (!in.cell_values.empty() && in.cell_values.size() != mesh.cells.size())
        throw ValidationError("render: need one value per cell");

    double xmin = std::numeric_limits<double>::infinity(), ymin = xmin;
    double xmax = -xmin, ymax = -xmin;
    auto grow = [&](const Vec2& p) {
        xmin = std::min(xmin, p.x());
        xmax = std::max(xmax, p.x());
        ymin = std::min(ymin, p.y());
        ymax = std::max(ymax, p.y());
    };
    for (const auto& p : pos) grow(p);
    for (const auto& m : in.markers) {
        grow(m.target);
        if (m.achieved) grow(*m.achieved);
    }
    const double s = in.px_per_mm;
    const double margin = 20.0;
    const double legend_h = in.cell_values.empty() ? 0.0 : 50.0;
    const double width = (xmax - xmin) * s + 2 * margin;
    const double height = (ymax - ymin) * s + 2 * margin + legend_h;
    auto X = [&](double x) { return num(margin + (x - xmin) * s); };
    auto Y = [&](double y) { return num(margin + (ymax - y) * s); };

    double vmin = 0, vmax = 0;
    if (!in.cell_values.empty()) {
        vmin = *std::min_element(in.cell_values.begin(), in.cell_values.end());
        vmax = *std::max_element(in.cell_values.begin(), in.cell_values.end());
    }

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
       << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    os << "<g id=\"cells\" stroke=\"none\">\n";
    for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
        std::string fill = "#d9d9d9";
        if (!in.cell_values.empty()) fill = hex(ramp_color(vmax > vmin ? (in.cell_values[c] - vmin) / (vmax - vmin) : 0.0));
        os << "<polygon points=\"";
        for (int j = 0; j < kCellVertices; ++j) {
            const Vec2& p = pos[mesh.cells[c][j]];
            os << (j ? " " : "") << X(p.x()) << ',' << Y(p.y());
        }
        os << "\" fill=\"" << fill << "\"/>\n";
    }
    os << "</g>\n<g id=\"bars\" stroke=\"#000000\" stroke-width=\"1\">\n";
    for (const auto& e : mesh.edges)
        os << "<line x1=\"" << X(pos[e[0]].x()) << "\" y1=\"" << Y(pos[e[0]].y()) << "\" x2=\"" << X(pos[e[1]].x())
           << "\" y2=\"" << Y(pos[e[1]].y()) << "\"/>\n";
    os << "</g>\n";
    if (!in.markers.empty()) {
        os << "<g id=\"targets\" fill=\"none\" stroke=\"#1f60c4\" stroke-width=\"1.5\">\n";
        for (const auto& m : in.markers)
            os << "<circle cx=\"" << X(m.target.x()) << "\" cy=\"" << Y(m.target.y()) << "\" r=\"4\"/>\n";
        os << "</g>\n<g id=\"achieved\" fill=\"#d62728\" stroke=\"none\">\n";
        for (const auto& m : in.markers) {
            if (!m.achieved) continue;
            os << "<rect x=\"" << num(margin + (m.achieved->x() - xmin) * s - 2.5) << "\" y=\""
               << num(margin + (ymax - m.achieved->y()) * s - 2.5) << "\" width=\"5\" height=\"5\"/>\n";
        }
        os << "</g>\n";
    }
    if (!in.cell_values.empty()) {
        const double ly = height - legend_h + 10;
        const double lw = std::min(200.0, width - 2 * margin);
        os << "<defs><linearGradient id=\"ramp\" x1=\"0\" x2=\"1\" y1=\"0\" y2=\"0\">\n";
        for (std::size_t k = 0; k < kColorRamp.size(); ++k)
            os << "<stop offset=\"" << num(static_cast<double>(k) / (kColorRamp.size() - 1)) << "\" stop-color=\""
               << hex(kColorRamp[k]) << "\"/>\n";
        os << "</linearGradient></defs>\n";
        os << "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"10\">\n";
        os << "<rect x=\"" << num(margin) << "\" y=\"" << num(ly) << "\" width=\"" << num(lw)
           << "\" height=\"10\" fill=\"url(#ramp)\" stroke=\"#000000\" stroke-width=\"0.5\"/>\n";
        os << "<text x=\"" << num(margin) << "\" y=\"" << num(ly + 24) << "\">min " << detail::sci(vmin) << "</text>\n";
        os << "<text x=\"" << num(margin + lw) << "\" y=\"" << num(ly + 24) << "\" text-anchor=\"end\">max "
           << detail::sci(vmax) << "</text>\n";
        os << "<text x=\"" << num(margin + lw + 10) << "\" y=\"" << num(ly + 9) << "\">" << detail::xml_escape(in.value_label) << "</text>\n";
        os << "</g>\n";
    }
    os << "</svg>\n";
}

}  // namespace morphkit
