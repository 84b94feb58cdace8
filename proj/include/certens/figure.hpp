#pragma once

// SVG rendering of grid answers: one panel per system, hue by label
// (0 red, 1 blue, 2 green, ...), dark when certified and light otherwise.

#include <array>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "certens/io.hpp"
#include "certens/toy_lab.hpp"

namespace certens {

struct FigurePanel {
    std::string title;
    std::vector<CertOutput> answers;
};

inline std::string label_color(CertOutput o)
{
    // {dark, light}
    static const std::array<std::array<const char*, 2>, 6> palette{{
        {"#b2182b", "#f4a582"}, // red
        {"#2166ac", "#92c5de"}, // blue
        {"#1b7837", "#a6dba0"}, // green
        {"#762a83", "#c2a5cf"}, // purple
        {"#b35806", "#fdb863"}, // orange
        {"#404040", "#bababa"}, // everything else
    }};
    const auto& c = palette[std::min<std::size_t>(o.label.value, palette.size() - 1)];
    return o.cert ? c[0] : c[1];
}

/// Renders each panel as an nx-by-ny raster (y grows upward) built from
/// horizontal runs of equal colour. Points are assumed to be in lattice
/// order, x fastest, as produced by `build_grid`.
inline void write_figure_svg(std::ostream& out, const ToyGrid& g, std::span<const FigurePanel> panels,
                             int cell_px = 2)
{
    for (const auto& p : panels)
        if (p.answers.size() != g.size()) throw DimensionError("write_figure_svg: panel answer count mismatch");
    if (g.nx * g.ny != g.size()) throw PreconditionError("write_figure_svg: grid is not a full lattice");

    const int gap = 16, title_h = 22;
    const int pw = static_cast<int>(g.nx) * cell_px, ph = static_cast<int>(g.ny) * cell_px;
    const int width = static_cast<int>(panels.size()) * (pw + gap) + gap;
    const int height = ph + title_h + 2 * gap;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\" shape-rendering=\"crispEdges\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t k = 0; k < panels.size(); ++k) {
        const int ox = gap + static_cast<int>(k) * (pw + gap), oy = gap + title_h;
        out << "<g>\n<text x=\"" << ox + pw / 2 << "\" y=\"" << gap + 14
            << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">" << panels[k].title
            << "</text>\n";
        const auto& a = panels[k].answers;
        for (std::size_t j = 0; j < g.ny; ++j) {
            const int y = oy + static_cast<int>(g.ny - 1 - j) * cell_px;
            std::size_t i = 0;
            while (i < g.nx) {
                const std::string color = label_color(a[j * g.nx + i]);
                std::size_t end = i + 1;
                while (end < g.nx && label_color(a[j * g.nx + end]) == color) ++end;
                out << "<rect x=\"" << ox + static_cast<int>(i) * cell_px << "\" y=\"" << y << "\" width=\""
                    << static_cast<int>(end - i) * cell_px << "\" height=\"" << cell_px << "\" fill=\"" << color
                    << "\"/>\n";
                i = end;
            }
        }
        out << "<rect x=\"" << ox << "\" y=\"" << oy << "\" width=\"" << pw << "\" height=\"" << ph
            << "\" fill=\"none\" stroke=\"black\"/>\n</g>\n";
    }
    out << "</svg>\n";
}

/// Standard panel set: each constituent, then the cascade and uniform voting.
inline std::vector<FigurePanel> standard_panels(const ToyGrid& g)
{
    std::vector<FigurePanel> panels;
    const char letters[] = "abcdefghijklmnopqrstuvwxyz";
    std::size_t k = 0;
    auto title = [&](const std::string& what) {
        std::string t = k < 26 ? std::string("(") + letters[k] + ") " + what : what;
        ++k;
        return t;
    };
    for (std::size_t i = 0; i < g.constituents; ++i)
        panels.push_back({title("model " + std::to_string(i)), constituent_over_grid(g, i)});
    panels.push_back({title("cascading"), ensemble_over_grid(g, Cascade{})});
    panels.push_back({title("uniform voting"), ensemble_over_grid(g, UniformVoting{})});
    return panels;
}

/// Writes the panels' answers as a grid CSV and as an SVG figure. Either
/// path may be empty to skip that output.
inline void export_figure(const ToyGrid& g, std::span<const FigurePanel> panels, const std::string& csv_path,
                          const std::string& svg_path)
{
    if (!csv_path.empty()) {
        std::vector<std::vector<CertOutput>> systems;
        for (const auto& p : panels) systems.push_back(p.answers);
        auto out = detail::open_out(csv_path);
        write_grid_csv(out, g, systems);
    }
    if (!svg_path.empty()) {
        auto out = detail::open_out(svg_path);
        write_figure_svg(out, g, panels);
    }
}

} // namespace certens
