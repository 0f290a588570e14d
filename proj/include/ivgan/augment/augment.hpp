#pragma once

// Rotation and scaling of paired samples. Intensities are resampled
// bilinearly, label maps by nearest neighbour, and contours are transformed
// analytically so the ground truth stays exact.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ivgan/diffcore/rng.hpp"
#include "ivgan/error.hpp"
#include "ivgan/geometry.hpp"
#include "ivgan/phantom/phantom.hpp"

namespace ivgan::augment {

using phantom::Sample;

inline constexpr double kMinScale = 0.5;
inline constexpr double kMaxScale = 1.5;

namespace detail {

/// Output pixel q samples the input at inverse(q). Out-of-frame samples take
/// the tissue class and the background intensity.
template <class InverseMap>
Sample resample(const Sample& in, InverseMap inverse)
{
    const std::size_t w = in.labels.width;
    const std::size_t h = in.labels.height;
    Sample out = in;
    out.condition = Image(in.condition.channels, h, w);
    out.labels = LabelMask(w, h);
    const double max_x = static_cast<double>(w) - 1.0;
    const double max_y = static_cast<double>(h) - 1.0;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const Point src = inverse(Point{static_cast<double>(x), static_cast<double>(y)});
            const double rx = std::round(src.x);
            const double ry = std::round(src.y);
            if (rx >= 0.0 && ry >= 0.0 && rx <= max_x && ry <= max_y) {
                out.labels(x, y) = in.labels(static_cast<std::size_t>(rx), static_cast<std::size_t>(ry));
            } else {
                out.labels(x, y) = static_cast<std::uint8_t>(TissueClass::tissue);
            }
            const bool inside = src.x >= 0.0 && src.y >= 0.0 && src.x <= max_x && src.y <= max_y;
            for (std::size_t c = 0; c < in.condition.channels; ++c) {
                out.condition.at(c, y, x) =
                    inside ? static_cast<float>(bilinear(in.condition, c, src.x, src.y)) : phantom::kBackgroundCondition;
            }
        }
    }
    out.target = phantom::target_from_labels(out.labels);
    return out;
}

/// Exact pixel permutation for quarter turns (square images only).
inline Sample rotate_quarter_turns(const Sample& in, int quarters)
{
    const std::size_t n = in.labels.width;
    Sample out = in;
    for (int q = 0; q < quarters; ++q) {
        Sample prev = out;
        for (std::size_t y = 0; y < n; ++y) {
            for (std::size_t x = 0; x < n; ++x) {
                // Output (x,y) = center + R(90)(p - center) for p = (y, n-1-x).
                const std::size_t sx = y;
                const std::size_t sy = n - 1 - x;
                out.labels(x, y) = prev.labels(sx, sy);
                for (std::size_t c = 0; c < in.condition.channels; ++c) {
                    out.condition.at(c, y, x) = prev.condition.at(c, sy, sx);
                }
            }
        }
    }
    out.target = phantom::target_from_labels(out.labels);
    return out;
}

}  // namespace detail

/// Rotate about the image center by `angle_degrees` in [0, 360).
inline Sample rotate_sample(const Sample& sample, double angle_degrees)
{
    if (!(angle_degrees >= 0.0 && angle_degrees < 360.0)) {
        throw ConfigError("rotate_sample: angle must lie in [0,360), got " + std::to_string(angle_degrees));
    }
    if (angle_degrees == 0.0) {
        return sample;
    }
    const Point c = phantom::image_center(sample.labels.width);
    const double quarters = angle_degrees / 90.0;
    Sample out;
    if (sample.labels.width == sample.labels.height && quarters == std::floor(quarters)) {
        out = detail::rotate_quarter_turns(sample, static_cast<int>(quarters));
        // Rotate contour vertices with exact quarter-turn arithmetic as well.
        auto quarter = [&](Point p) {
            for (int q = 0; q < static_cast<int>(quarters); ++q) {
                p = {c.x - (p.y - c.y), c.y + (p.x - c.x)};
            }
            return p;
        };
        for (auto* contour : {&out.lu_contour, &out.ma_contour}) {
            for (auto& v : contour->vertices) {
                v = quarter(v);
            }
        }
        out.center = quarter(out.center);
        return out;
    }
    out = detail::resample(sample, [&](Point q) { return rotate_point(q, c, -angle_degrees); });
    out.lu_contour = rotate_contour(sample.lu_contour, c, angle_degrees);
    out.ma_contour = rotate_contour(sample.ma_contour, c, angle_degrees);
    out.center = rotate_point(sample.center, c, angle_degrees);
    return out;
}

/// Zoom about the image center; the output keeps the input size.
inline Sample scale_sample(const Sample& sample, double factor)
{
    if (!(factor >= kMinScale && factor <= kMaxScale)) {
        throw ConfigError("scale_sample: factor must lie in [0.5,1.5], got " + std::to_string(factor));
    }
    if (factor == 1.0) {
        return sample;
    }
    const Point c = phantom::image_center(sample.labels.width);
    Sample out = detail::resample(sample, [&](Point q) {
        return Point{c.x + (q.x - c.x) / factor, c.y + (q.y - c.y) / factor};
    });
    out.lu_contour = scale_contour(sample.lu_contour, c, factor);
    out.ma_contour = scale_contour(sample.ma_contour, c, factor);
    out.center = {c.x + factor * (sample.center.x - c.x), c.y + factor * (sample.center.y - c.y)};
    return out;
}

/// For each input: the original, `n_rotations` rotations at angles drawn
/// uniformly from [0,360) with a seeded stream, then one copy per scale factor.
/// Output order is input-major, so the result is deterministic.
inline std::vector<Sample> augment_dataset(const std::vector<Sample>& samples, std::size_t n_rotations,
                                           const std::vector<double>& scale_factors, std::uint64_t seed)
{
    std::vector<Sample> out;
    out.reserve(samples.size() * (1 + n_rotations + scale_factors.size()));
    const Rng base = Rng(seed).fork("augment.rotation");
    for (const Sample& s : samples) {
        out.push_back(s);
        Rng rng = base.fork(s.index);
        for (std::size_t r = 0; r < n_rotations; ++r) {
            out.push_back(rotate_sample(s, rng.uniform(0.0, 360.0)));
        }
        for (double f : scale_factors) {
            out.push_back(scale_sample(s, f));
        }
    }
    return out;
}

}  // namespace ivgan::augment
