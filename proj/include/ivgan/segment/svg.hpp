#pragma once

// Standalone SVG overlay: grayscale condition image with predicted and
// ground-truth LU/MA contours. Pixel (x,y) is drawn as the unit square
// centred on (x,y), matching the contour coordinate convention.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "ivgan/error.hpp"
#include "ivgan/geometry.hpp"

namespace ivgan::segment {

struct OverlayContours {
    std::optional<Contour> pred_lu, pred_ma;
    Contour true_lu, true_ma;
};

inline std::string svg_points(const Contour& c, double scale)
{
    std::ostringstream os;
    char buf[64];
    for (const Point& p : c.vertices) {
        std::snprintf(buf, sizeof buf, "%.3f,%.3f ", (p.x + 0.5) * scale, (p.y + 0.5) * scale);
        os << buf;
    }
    return os.str();
}

/// `image` channel 0 holds intensities in [-1,1].
inline std::string overlay_svg(const Image& image, const OverlayContours& c, double scale = 6.0)
{
    std::ostringstream os;
    const double w = static_cast<double>(image.width) * scale;
    const double h = static_cast<double>(image.height) * scale;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 "
       << w << ' ' << h << "\">\n";
    os << "<g shape-rendering=\"crispEdges\">\n";
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x) {
            const double v = std::clamp((static_cast<double>(image.at(0, y, x)) + 1.0) * 127.5, 0.0, 255.0);
            const int g = static_cast<int>(std::lround(v));
            os << "<rect x=\"" << static_cast<double>(x) * scale << "\" y=\"" << static_cast<double>(y) * scale
               << "\" width=\"" << scale << "\" height=\"" << scale << "\" fill=\"rgb(" << g << ',' << g << ',' << g
               << ")\"/>\n";
        }
    }
    os << "</g>\n";
    const auto poly = [&](const Contour& contour, const char* colour, const char* dash, const char* id) {
        os << "<polygon id=\"" << id << "\" points=\"" << svg_points(contour, scale) << "\" fill=\"none\" stroke=\""
           << colour << "\" stroke-width=\"1.5\"" << (dash ? std::string(" stroke-dasharray=\"") + dash + "\"" : "")
           << "/>\n";
    };
    poly(c.true_lu, "#00c000", "4 2", "truth-lu");
    poly(c.true_ma, "#00c0c0", "4 2", "truth-ma");
    if (c.pred_lu) {
        poly(*c.pred_lu, "#ff3030", nullptr, "pred-lu");
    }
    if (c.pred_ma) {
        poly(*c.pred_ma, "#ffb000", nullptr, "pred-ma");
    }
    os << "</svg>\n";
    return os.str();
}

inline void write_overlay_svg(const std::filesystem::path& path, const Image& image, const OverlayContours& c)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot write " + path.string());
    }
    os << overlay_svg(image, c);
}

}  // namespace ivgan::segment
