#pragma once

// Generator output -> three-class label map -> binary masks -> LU/MA contours.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ivgan/error.hpp"
#include "ivgan/geometry.hpp"

namespace ivgan::segment {

enum class Region {
    lumen,              // class 0
    lumen_plus_plaque,  // classes 0 and 1
};

/// Per-pixel argmax over a [3,H,W] channel block. Ties go to the lower class.
inline LabelMask predict_labels(std::span<const float> channels, std::size_t n_channels, std::size_t height,
                                std::size_t width)
{
    if (n_channels != kNumClasses) {
        throw ShapeError("predict_labels expects 3 channels, got " + std::to_string(n_channels));
    }
    if (channels.size() != n_channels * height * width) {
        throw ShapeError("predict_labels: buffer holds " + std::to_string(channels.size()) + " values, expected " +
                         std::to_string(n_channels * height * width));
    }
    const std::size_t plane = height * width;
    LabelMask out(width, height);
    for (std::size_t i = 0; i < plane; ++i) {
        std::uint8_t best = 0;
        float best_v = channels[i];
        for (std::size_t c = 1; c < n_channels; ++c) {
            const float v = channels[c * plane + i];
            if (v > best_v) {
                best_v = v;
                best = static_cast<std::uint8_t>(c);
            }
        }
        out.values[i] = best;
    }
    return out;
}

inline LabelMask predict_labels(const Image& gen_output)
{
    return predict_labels(gen_output.values, gen_output.channels, gen_output.height, gen_output.width);
}

inline BinaryMask binarize(const LabelMask& labels, Region region)
{
    BinaryMask m(labels.width, labels.height);
    const std::uint8_t max_class = region == Region::lumen ? 0 : 1;
    for (std::size_t i = 0; i < labels.values.size(); ++i) {
        if (labels.values[i] > 2) {
            throw Error("label map holds value " + std::to_string(labels.values[i]) + " outside {0,1,2}");
        }
        m.values[i] = labels.values[i] <= max_class ? 1 : 0;
    }
    return m;
}

namespace detail {

/// Labels connected components of pixels equal to `value`. Returns the
/// component id per pixel (-1 elsewhere) and the component sizes.
inline std::pair<std::vector<int>, std::vector<std::size_t>> components(const BinaryMask& m, std::uint8_t value,
                                                                        bool eight_connected)
{
    const std::size_t w = m.width, h = m.height;
    std::vector<int> id(w * h, -1);
    std::vector<std::size_t> sizes;
    std::deque<std::size_t> queue;
    for (std::size_t start = 0; start < w * h; ++start) {
        if (m.values[start] != value || id[start] >= 0) {
            continue;
        }
        const int comp = static_cast<int>(sizes.size());
        sizes.push_back(0);
        id[start] = comp;
        queue.push_back(start);
        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            ++sizes.back();
            const long x = static_cast<long>(p % w);
            const long y = static_cast<long>(p / w);
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if ((dx == 0 && dy == 0) || (!eight_connected && dx != 0 && dy != 0)) {
                        continue;
                    }
                    const long nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= static_cast<long>(w) || ny >= static_cast<long>(h)) {
                        continue;
                    }
                    const auto q = static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
                    if (m.values[q] == value && id[q] < 0) {
                        id[q] = comp;
                        queue.push_back(q);
                    }
                }
            }
        }
    }
    return {std::move(id), std::move(sizes)};
}

}  // namespace detail

/// Keeps the largest 4-connected foreground component (first in raster order
/// on ties) and fills its holes. Background is treated as 8-connected, the
/// dual of 4-connected foreground, so the result has exactly one boundary.
inline BinaryMask cleanup(const BinaryMask& mask)
{
    const std::size_t w = mask.width, h = mask.height;
    BinaryMask out(w, h);
    auto [fg_id, fg_sizes] = detail::components(mask, 1, false);
    if (fg_sizes.empty()) {
        return out;
    }
    const int keep = static_cast<int>(std::max_element(fg_sizes.begin(), fg_sizes.end()) - fg_sizes.begin());
    for (std::size_t i = 0; i < w * h; ++i) {
        out.values[i] = fg_id[i] == keep ? 1 : 0;
    }

    auto [bg_id, bg_sizes] = detail::components(out, 0, true);
    std::vector<bool> touches_border(bg_sizes.size(), false);
    for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t y : {std::size_t{0}, h - 1}) {
            if (int c = bg_id[y * w + x]; c >= 0) {
                touches_border[static_cast<std::size_t>(c)] = true;
            }
        }
    }
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x : {std::size_t{0}, w - 1}) {
            if (int c = bg_id[y * w + x]; c >= 0) {
                touches_border[static_cast<std::size_t>(c)] = true;
            }
        }
    }
    for (std::size_t i = 0; i < w * h; ++i) {
        if (bg_id[i] >= 0 && !touches_border[static_cast<std::size_t>(bg_id[i])]) {
            out.values[i] = 1;
        }
    }
    return out;
}

/// Marching-squares isocontour of the mask indicator at level 0.5, sampled at
/// pixel centers and padded with background so the curve always closes.
/// Crossings sit at cell-edge midpoints (exact linear interpolation of a 0/1
/// field). Saddle cells separate the two foreground corners, consistent with
/// 4-connected foreground. Returns the loop enclosing the largest area,
/// oriented counter-clockwise.
inline Contour extract_contour(const BinaryMask& mask)
{
    const long w = static_cast<long>(mask.width);
    const long h = static_cast<long>(mask.height);
    auto fg = [&](long x, long y) {
        return x >= 0 && y >= 0 && x < w && y < h && mask(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) != 0;
    };

    // Crossing points live on a half-pixel lattice; key them by doubled
    // coordinates shifted to be non-negative.
    const long kw = 2 * (w + 2) + 1;
    const long kh = 2 * (h + 2) + 1;
    auto key = [&](long x2, long y2) { return static_cast<std::size_t>((y2 + 2) * kw + (x2 + 2)); };
    std::vector<std::array<long, 2>> nbr(static_cast<std::size_t>(kw * kh), {-1, -1});
    bool any = false;
    auto link_one = [&](std::size_t a, std::size_t b) {
        auto& slot = nbr[a];
        if (slot[0] < 0) {
            slot[0] = static_cast<long>(b);
        } else {
            slot[1] = static_cast<long>(b);
        }
    };
    auto link = [&](std::size_t a, std::size_t b) {
        link_one(a, b);
        link_one(b, a);
        any = true;
    };

    for (long j = -1; j < h; ++j) {
        for (long i = -1; i < w; ++i) {
            const bool a = fg(i, j), b = fg(i + 1, j), c = fg(i + 1, j + 1), d = fg(i, j + 1);
            const std::size_t top = key(2 * i + 1, 2 * j);
            const std::size_t right = key(2 * i + 2, 2 * j + 1);
            const std::size_t bottom = key(2 * i + 1, 2 * j + 2);
            const std::size_t left = key(2 * i, 2 * j + 1);
            std::vector<std::size_t> edges;
            if (a != b) edges.push_back(top);
            if (b != c) edges.push_back(right);
            if (c != d) edges.push_back(bottom);
            if (d != a) edges.push_back(left);
            if (edges.size() == 2) {
                link(edges[0], edges[1]);
            } else if (edges.size() == 4) {
                if (a) {  // a and c foreground
                    link(top, left);
                    link(right, bottom);
                } else {  // b and d foreground
                    link(top, right);
                    link(bottom, left);
                }
            }
        }
    }
    if (!any) {
        throw RegionError("no region: mask has no foreground pixels");
    }

    auto to_point = [&](std::size_t k) {
        const long y2 = static_cast<long>(k) / kw - 2;
        const long x2 = static_cast<long>(k) % kw - 2;
        return Point{static_cast<double>(x2) / 2.0, static_cast<double>(y2) / 2.0};
    };

    std::vector<bool> visited(nbr.size(), false);
    Contour best;
    double best_area = -1.0;
    for (std::size_t start = 0; start < nbr.size(); ++start) {
        if (nbr[start][0] < 0 || visited[start]) {
            continue;
        }
        Contour loop;
        std::size_t prev = nbr.size();  // sentinel: first step follows slot 0
        std::size_t cur = start;
        do {
            visited[cur] = true;
            loop.vertices.push_back(to_point(cur));
            const auto& n = nbr[cur];
            const auto next = static_cast<std::size_t>(static_cast<std::size_t>(n[0]) != prev ? n[0] : n[1]);
            prev = cur;
            cur = next;
        } while (cur != start);
        const double a = std::abs(signed_area(loop));
        if (a > best_area) {
            best_area = a;
            best = std::move(loop);
        }
    }
    if (signed_area(best) < 0.0) {
        std::reverse(best.vertices.begin(), best.vertices.end());
    }
    return best;
}

struct Boundaries {
    Contour lu;
    Contour ma;
};

inline Boundaries lu_ma_boundaries(const LabelMask& labels)
{
    Boundaries b;
    try {
        b.lu = extract_contour(cleanup(binarize(labels, Region::lumen)));
    } catch (const RegionError&) {
        throw RegionError("no region: label map has no lumen pixels");
    }
    try {
        b.ma = extract_contour(cleanup(binarize(labels, Region::lumen_plus_plaque)));
    } catch (const RegionError&) {
        throw RegionError("no region: label map has no lumen or plaque pixels");
    }
    return b;
}

}  // namespace ivgan::segment
