#pragma once

// Region overlap (Jaccard, percentage area difference) and contour distance
// (Hausdorff, average distance) measures for the LU and MA borders.
//
// Distances are point-to-point between arc-length resamplings of the two
// polygons with a pitch of at most kResamplePitch pixels.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ivgan/error.hpp"
#include "ivgan/geometry.hpp"
#include "ivgan/phantom/phantom.hpp"
#include "ivgan/segment/segment.hpp"

namespace ivgan::metrics {

inline constexpr double kResamplePitch = 0.25;

struct Calibration {
    double pixel_spacing = 1.0;  // length per pixel; 1.0 reports pixel units

    void validate() const
    {
        if (!(pixel_spacing > 0.0)) {
            throw ConfigError("pixel_spacing must be positive");
        }
    }
};

/// |A n B| / |A u B|. Two empty masks score 1.0.
inline double jaccard(const BinaryMask& pred, const BinaryMask& truth)
{
    if (pred.width != truth.width || pred.height != truth.height) {
        throw ShapeError("jaccard: mask sizes differ");
    }
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        const bool a = pred.values[i] != 0;
        const bool b = truth.values[i] != 0;
        inter += (a && b) ? 1 : 0;
        uni += (a || b) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// |area(pred) - area(truth)| / area(truth) * 100.
inline double pad(const BinaryMask& pred, const BinaryMask& truth)
{
    if (pred.width != truth.width || pred.height != truth.height) {
        throw ShapeError("pad: mask sizes differ");
    }
    const auto t = static_cast<double>(truth.count());
    if (t == 0.0) {
        throw Error("pad: ground-truth mask is empty");
    }
    return std::abs(static_cast<double>(pred.count()) - t) / t * 100.0;
}

/// Exact nearest-neighbour queries over a fixed point set via a uniform grid.
class NearestNeighbors {
public:
    explicit NearestNeighbors(const std::vector<Point>& points, double cell = 1.0) : points_(points), cell_(cell)
    {
        if (points_.empty()) {
            throw Error("nearest-neighbour index over an empty point set");
        }
        min_x_ = max_x_ = points_[0].x;
        min_y_ = max_y_ = points_[0].y;
        for (const Point& p : points_) {
            min_x_ = std::min(min_x_, p.x);
            max_x_ = std::max(max_x_, p.x);
            min_y_ = std::min(min_y_, p.y);
            max_y_ = std::max(max_y_, p.y);
        }
        nx_ = static_cast<long>(std::floor((max_x_ - min_x_) / cell_)) + 1;
        ny_ = static_cast<long>(std::floor((max_y_ - min_y_) / cell_)) + 1;
        buckets_.assign(static_cast<std::size_t>(nx_ * ny_), {});
        for (std::size_t i = 0; i < points_.size(); ++i) {
            buckets_[static_cast<std::size_t>(cell_y(points_[i].y) * nx_ + cell_x(points_[i].x))].push_back(i);
        }
    }

    /// Squared distance from q to its nearest point in the set.
    double min_distance_squared(Point q) const
    {
        const long qx = static_cast<long>(std::floor((q.x - min_x_) / cell_));
        const long qy = static_cast<long>(std::floor((q.y - min_y_) / cell_));
        double best = std::numeric_limits<double>::infinity();
        const long max_ring = std::max({std::abs(qx), std::abs(qy), std::abs(nx_ - 1 - qx), std::abs(ny_ - 1 - qy)});
        for (long r = 0; r <= max_ring; ++r) {
            for (long cy = qy - r; cy <= qy + r; ++cy) {
                if (cy < 0 || cy >= ny_) {
                    continue;
                }
                const bool edge_row = cy == qy - r || cy == qy + r;
                for (long cx = qx - r; cx <= qx + r; cx += (edge_row ? 1 : 2 * r)) {
                    if (cx >= 0 && cx < nx_) {
                        for (std::size_t i : buckets_[static_cast<std::size_t>(cy * nx_ + cx)]) {
                            best = std::min(best, distance_squared(q, points_[i]));
                        }
                    }
                    if (r == 0) {
                        break;
                    }
                }
            }
            // Points in rings beyond r are at least r * cell away.
            const double reach = static_cast<double>(r) * cell_;
            if (best <= reach * reach) {
                break;
            }
        }
        return best;
    }

private:
    long cell_x(double x) const { return std::min(nx_ - 1, static_cast<long>(std::floor((x - min_x_) / cell_))); }
    long cell_y(double y) const { return std::min(ny_ - 1, static_cast<long>(std::floor((y - min_y_) / cell_))); }

    std::vector<Point> points_;
    double cell_;
    double min_x_ = 0, max_x_ = 0, min_y_ = 0, max_y_ = 0;
    long nx_ = 0, ny_ = 0;
    std::vector<std::vector<std::size_t>> buckets_;
};

/// Per-point squared nearest distances from `from` to `to`.
inline std::vector<double> nearest_squared(const std::vector<Point>& from, const std::vector<Point>& to)
{
    const NearestNeighbors index(to);
    std::vector<double> out(from.size());
    for (std::size_t i = 0; i < from.size(); ++i) {
        out[i] = index.min_distance_squared(from[i]);
    }
    return out;
}

inline void require_contour(const Contour& c, const char* op)
{
    if (c.size() < 3 || !(perimeter(c) > 0.0)) {
        throw Error(std::string(op) + ": degenerate contour");
    }
}

/// Hausdorff distance over point sets that are already resampled.
inline double hausdorff_points(const std::vector<Point>& a, const std::vector<Point>& b)
{
    double worst = 0.0;
    for (double d : nearest_squared(a, b)) {
        worst = std::max(worst, d);
    }
    for (double d : nearest_squared(b, a)) {
        worst = std::max(worst, d);
    }
    return std::sqrt(worst);
}

/// Mean of the two directed mean nearest distances.
inline double avg_distance_points(const std::vector<Point>& a, const std::vector<Point>& b)
{
    double sum_ab = 0.0;
    for (double d : nearest_squared(a, b)) {
        sum_ab += std::sqrt(d);
    }
    double sum_ba = 0.0;
    for (double d : nearest_squared(b, a)) {
        sum_ba += std::sqrt(d);
    }
    return 0.5 * (sum_ab / static_cast<double>(a.size()) + sum_ba / static_cast<double>(b.size()));
}

inline double hausdorff(const Contour& a, const Contour& b, const Calibration& cal = {})
{
    cal.validate();
    require_contour(a, "hausdorff");
    require_contour(b, "hausdorff");
    return hausdorff_points(resample_closed(a, kResamplePitch), resample_closed(b, kResamplePitch)) * cal.pixel_spacing;
}

inline double avg_distance(const Contour& a, const Contour& b, const Calibration& cal = {})
{
    cal.validate();
    require_contour(a, "avg_distance");
    require_contour(b, "avg_distance");
    return avg_distance_points(resample_closed(a, kResamplePitch), resample_closed(b, kResamplePitch)) *
           cal.pixel_spacing;
}

// ---------------------------------------------------------------------------
// Per-sample records

struct MetricsRecord {
    double lu_jm = 0.0;
    double ma_jm = 0.0;
    double lu_pad = 0.0;
    double ma_pad = 0.0;
    /// Absent when the predicted border could not be extracted.
    std::optional<double> lu_hd, ma_hd, lu_ad, ma_ad;
};

inline constexpr const char* kMetricNames[8] = {"lu_jm", "ma_jm", "lu_pad", "ma_pad",
                                                "lu_hd", "ma_hd", "lu_ad", "ma_ad"};

/// Metric values in kMetricNames order; NaN marks an absent distance.
inline std::array<double, 8> as_array(const MetricsRecord& r)
{
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    return {r.lu_jm,          r.ma_jm,          r.lu_pad,         r.ma_pad,
            r.lu_hd.value_or(nan), r.ma_hd.value_or(nan), r.lu_ad.value_or(nan), r.ma_ad.value_or(nan)};
}

inline MetricsRecord evaluate_sample(const LabelMask& pred, const phantom::Sample& truth, const Calibration& cal = {})
{
    if (pred.width != truth.labels.width || pred.height != truth.labels.height) {
        throw ShapeError("evaluate_sample: predicted and true label maps differ in size");
    }
    MetricsRecord r;
    const auto score = [&](segment::Region region, const Contour& true_contour, double& jm, double& pad_out,
                           std::optional<double>& hd, std::optional<double>& ad) {
        const BinaryMask pred_mask = segment::cleanup(segment::binarize(pred, region));
        const BinaryMask true_mask = segment::binarize(truth.labels, region);
        jm = jaccard(pred_mask, true_mask);
        pad_out = pad(pred_mask, true_mask);
        if (pred_mask.count() == 0) {
            return;
        }
        const Contour c = segment::extract_contour(pred_mask);
        hd = hausdorff(c, true_contour, cal);
        ad = avg_distance(c, true_contour, cal);
    };
    score(segment::Region::lumen, truth.lu_contour, r.lu_jm, r.lu_pad, r.lu_hd, r.lu_ad);
    score(segment::Region::lumen_plus_plaque, truth.ma_contour, r.ma_jm, r.ma_pad, r.ma_hd, r.ma_ad);
    return r;
}

struct MetricsSummary {
    std::size_t count = 0;
    std::size_t lu_misses = 0;  // samples without an extractable LU border
    std::size_t ma_misses = 0;
    std::array<double, 8> mean{};
    std::array<double, 8> stddev{};  // sample standard deviation (n - 1)
};

/// Arithmetic mean and sample standard deviation per metric, skipping absent
/// distances. A metric with no present values reports NaN.
inline MetricsSummary aggregate(const std::vector<MetricsRecord>& records)
{
    MetricsSummary s;
    s.count = records.size();
    for (const auto& r : records) {
        s.lu_misses += r.lu_hd ? 0 : 1;
        s.ma_misses += r.ma_hd ? 0 : 1;
    }
    for (std::size_t m = 0; m < 8; ++m) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : records) {
            const double v = as_array(r)[m];
            if (!std::isnan(v)) {
                sum += v;
                ++n;
            }
        }
        if (n == 0) {
            s.mean[m] = s.stddev[m] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        const double mu = sum / static_cast<double>(n);
        double ss = 0.0;
        for (const auto& r : records) {
            const double v = as_array(r)[m];
            if (!std::isnan(v)) {
                ss += (v - mu) * (v - mu);
            }
        }
        s.mean[m] = mu;
        s.stddev[m] = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    }
    return s;
}

}  // namespace ivgan::metrics
