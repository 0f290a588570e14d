#pragma once

// Planar geometry shared by the phantom, augmentation, segmentation and
// metric code. Coordinates are in pixels: x is the column, y the row, and
// pixel (col, row) has its center at (col, row). "Counter-clockwise" means a
// positive shoelace area in these (x, y) coordinates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "ivgan/error.hpp"

namespace ivgan {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline double distance_squared(Point a, Point b)
{
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

inline double distance(Point a, Point b) { return std::sqrt(distance_squared(a, b)); }

/// Closed polygon; the last vertex connects back to the first.
struct Contour {
    std::vector<Point> vertices;

    std::size_t size() const { return vertices.size(); }
    bool empty() const { return vertices.empty(); }
    friend bool operator==(const Contour&, const Contour&) = default;
};

inline double signed_area(const Contour& c)
{
    const auto& v = c.vertices;
    double twice = 0.0;
    for (std::size_t i = 0, n = v.size(); i < n; ++i) {
        const Point& a = v[i];
        const Point& b = v[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    return 0.5 * twice;
}

inline double area(const Contour& c) { return std::abs(signed_area(c)); }

inline double perimeter(const Contour& c)
{
    const auto& v = c.vertices;
    double total = 0.0;
    for (std::size_t i = 0, n = v.size(); i < n; ++i) {
        total += distance(v[i], v[(i + 1) % n]);
    }
    return total;
}

inline Point centroid_of_vertices(const Contour& c)
{
    Point p;
    for (const Point& v : c.vertices) {
        p.x += v.x;
        p.y += v.y;
    }
    if (!c.empty()) {
        p.x /= static_cast<double>(c.size());
        p.y /= static_cast<double>(c.size());
    }
    return p;
}

/// Rotate by `degrees` about `center` (positive = counter-clockwise in x/y).
inline Point rotate_point(Point p, Point center, double degrees)
{
    const double rad = degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(rad);
    const double sn = std::sin(rad);
    const double dx = p.x - center.x;
    const double dy = p.y - center.y;
    return {center.x + cs * dx - sn * dy, center.y + sn * dx + cs * dy};
}

inline Contour rotate_contour(const Contour& c, Point center, double degrees)
{
    Contour out;
    out.vertices.reserve(c.size());
    for (const Point& p : c.vertices) {
        out.vertices.push_back(rotate_point(p, center, degrees));
    }
    return out;
}

inline Contour scale_contour(const Contour& c, Point center, double factor)
{
    Contour out;
    out.vertices.reserve(c.size());
    for (const Point& p : c.vertices) {
        out.vertices.push_back({center.x + factor * (p.x - center.x), center.y + factor * (p.y - center.y)});
    }
    return out;
}

/// Points spaced uniformly by arc length along the closed polygon, starting at
/// vertex 0. The pitch is perimeter / ceil(perimeter / max_spacing), so it never
/// exceeds `max_spacing`.
inline std::vector<Point> resample_closed(const Contour& c, double max_spacing)
{
    if (c.size() < 2) {
        throw Error("cannot resample a contour with fewer than 2 vertices");
    }
    const double total = perimeter(c);
    if (!(total > 0.0)) {
        throw Error("cannot resample a zero-length contour");
    }
    const auto count = static_cast<std::size_t>(std::ceil(total / max_spacing));
    const double pitch = total / static_cast<double>(count);
    std::vector<Point> out;
    out.reserve(count);

    const auto& v = c.vertices;
    const std::size_t n = v.size();
    std::size_t seg = 0;
    double seg_start = 0.0;  // arc length at v[seg]
    double seg_len = distance(v[0], v[1 % n]);
    for (std::size_t k = 0; k < count; ++k) {
        const double s = pitch * static_cast<double>(k);
        while (seg + 1 < n && s > seg_start + seg_len) {
            seg_start += seg_len;
            ++seg;
            seg_len = distance(v[seg], v[(seg + 1) % n]);
        }
        const Point& a = v[seg];
        const Point& b = v[(seg + 1) % n];
        const double t = seg_len > 0.0 ? std::min(1.0, std::max(0.0, (s - seg_start) / seg_len)) : 0.0;
        out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
    }
    return out;
}

/// Proper-intersection test used to verify simplicity of small polygons.
inline bool is_simple_polygon(const Contour& c)
{
    const auto& v = c.vertices;
    const std::size_t n = v.size();
    if (n < 3) {
        return false;
    }
    auto orient = [](Point a, Point b, Point p) {
        const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        return (cross > 0.0) - (cross < 0.0);
    };
    auto on_segment = [](Point a, Point b, Point p) {
        return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
               p.y <= std::max(a.y, b.y);
    };
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = v[i], b = v[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (j == i || (j + 1) % n == i || (i + 1) % n == j) {
                continue;  // adjacent edges share a vertex
            }
            const Point p = v[j], q = v[(j + 1) % n];
            const int o1 = orient(a, b, p), o2 = orient(a, b, q);
            const int o3 = orient(p, q, a), o4 = orient(p, q, b);
            if (o1 != o2 && o3 != o4) {
                return false;
            }
            if ((o1 == 0 && on_segment(a, b, p)) || (o2 == 0 && on_segment(a, b, q)) ||
                (o3 == 0 && on_segment(p, q, a)) || (o4 == 0 && on_segment(p, q, b))) {
                return false;
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Raster containers

/// Row-major 2-D grid of values.
template <class V>
struct Grid {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<V> values;

    Grid() = default;
    Grid(std::size_t w, std::size_t h, V fill = V{}) : width(w), height(h), values(w * h, fill) {}

    V& operator()(std::size_t x, std::size_t y) { return values[y * width + x]; }
    const V& operator()(std::size_t x, std::size_t y) const { return values[y * width + x]; }
    std::size_t size() const { return values.size(); }
    friend bool operator==(const Grid&, const Grid&) = default;
};

enum class TissueClass : std::uint8_t { lumen = 0, plaque = 1, tissue = 2 };

inline constexpr std::size_t kNumClasses = 3;

/// Per-pixel class in {0 = lumen, 1 = plaque, 2 = tissue}.
struct LabelMask : Grid<std::uint8_t> {
    using Grid::Grid;
    friend bool operator==(const LabelMask&, const LabelMask&) = default;
};

/// Per-pixel 0/1 indicator.
struct BinaryMask : Grid<std::uint8_t> {
    using Grid::Grid;
    std::size_t count() const
    {
        std::size_t n = 0;
        for (auto v : values) {
            n += v ? 1 : 0;
        }
        return n;
    }
    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// Multi-channel float image, layout [C,H,W].
struct Image {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> values;

    Image() = default;
    Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
        : channels(c), height(h), width(w), values(c * h * w, fill)
    {
    }

    float& at(std::size_t c, std::size_t y, std::size_t x) { return values[(c * height + y) * width + x]; }
    float at(std::size_t c, std::size_t y, std::size_t x) const { return values[(c * height + y) * width + x]; }
    friend bool operator==(const Image&, const Image&) = default;
};

/// Bilinear sample of one channel; coordinates must lie in [0,W-1]x[0,H-1].
inline double bilinear(const Image& img, std::size_t channel, double x, double y)
{
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    auto x0 = static_cast<std::size_t>(std::max(0.0, fx));
    auto y0 = static_cast<std::size_t>(std::max(0.0, fy));
    x0 = std::min(x0, img.width - 1);
    y0 = std::min(y0, img.height - 1);
    const std::size_t x1 = std::min(x0 + 1, img.width - 1);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double tx = x - static_cast<double>(x0);
    const double ty = y - static_cast<double>(y0);
    const double v00 = img.at(channel, y0, x0), v10 = img.at(channel, y0, x1);
    const double v01 = img.at(channel, y1, x0), v11 = img.at(channel, y1, x1);
    return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11);
}

}  // namespace ivgan
