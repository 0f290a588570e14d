#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ivgan/metrics/metrics.hpp"
#include "ivgan/phantom/phantom.hpp"

namespace {

namespace mt = ivgan::metrics;
using ivgan::BinaryMask;
using ivgan::Contour;
using ivgan::Point;

Contour square(double x0, double y0, double side)
{
    return Contour{{{x0, y0}, {x0 + side, y0}, {x0 + side, y0 + side}, {x0, y0 + side}}};
}

Contour circle(double r, std::size_t n = 720)
{
    Contour c;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
        c.vertices.push_back({r * std::cos(t), r * std::sin(t)});
    }
    return c;
}

BinaryMask rect_mask(std::size_t w, std::size_t h, std::size_t x0, std::size_t y0, std::size_t rw, std::size_t rh)
{
    BinaryMask m(w, h);
    for (std::size_t y = y0; y < y0 + rh; ++y) {
        for (std::size_t x = x0; x < x0 + rw; ++x) {
            m(x, y) = 1;
        }
    }
    return m;
}

TEST(Jaccard, IdenticalAndDisjoint)
{
    const auto a = rect_mask(6, 6, 1, 1, 2, 2);
    EXPECT_EQ(mt::jaccard(a, a), 1.0);
    EXPECT_EQ(mt::jaccard(a, rect_mask(6, 6, 4, 4, 2, 2)), 0.0);
    EXPECT_EQ(mt::jaccard(BinaryMask(3, 3), BinaryMask(3, 3)), 1.0);
}

TEST(Jaccard, ShiftedSquareInThreeColumnGrid)
{
    const auto a = rect_mask(3, 2, 0, 0, 2, 2);
    const auto b = rect_mask(3, 2, 1, 0, 2, 2);
    EXPECT_DOUBLE_EQ(mt::jaccard(a, b), 2.0 / 6.0);
}

TEST(Jaccard, SizeMismatchThrows)
{
    EXPECT_THROW(mt::jaccard(BinaryMask(2, 2), BinaryMask(3, 2)), ivgan::ShapeError);
}

TEST(Pad, TenPercentUnderSegmentation)
{
    const auto truth = rect_mask(10, 10, 0, 0, 10, 10);
    const auto pred = rect_mask(10, 10, 0, 0, 10, 9);
    EXPECT_DOUBLE_EQ(mt::pad(pred, truth), 10.0);
}

TEST(Pad, InvariantToPixelPermutation)
{
    const auto truth = rect_mask(10, 10, 2, 2, 5, 5);
    auto pred = rect_mask(10, 10, 0, 0, 4, 7);
    const double before = mt::pad(pred, truth);
    std::reverse(pred.values.begin(), pred.values.end());
    EXPECT_EQ(mt::pad(pred, truth), before);
}

TEST(Pad, EmptyTruthThrows)
{
    EXPECT_THROW(mt::pad(rect_mask(3, 3, 0, 0, 1, 1), BinaryMask(3, 3)), ivgan::Error);
}

TEST(Hausdorff, UnitSquaresOffsetByOne)
{
    EXPECT_NEAR(mt::hausdorff(square(0, 0, 1), square(1, 0, 1)), 1.0, 1e-12);
    EXPECT_EQ(mt::hausdorff(square(0, 0, 1), square(0, 0, 1)), 0.0);
}

TEST(Hausdorff, ScalesLinearly)
{
    const Contour a = square(0, 0, 2), b = square(0.5, 0.25, 3);
    const double base = mt::hausdorff(a, b);
    for (double k : {2.0, 4.0}) {
        Contour ak = a, bk = b;
        for (auto& p : ak.vertices) {
            p = {p.x * k, p.y * k};
        }
        for (auto& p : bk.vertices) {
            p = {p.x * k, p.y * k};
        }
        EXPECT_NEAR(mt::hausdorff(ak, bk), k * base, 1e-9);
    }
}

TEST(Hausdorff, PixelSpacingScalesResult)
{
    mt::Calibration cal;
    cal.pixel_spacing = 0.02;
    EXPECT_NEAR(mt::hausdorff(square(0, 0, 1), square(1, 0, 1), cal), 0.02, 1e-12);
    cal.pixel_spacing = 0;
    EXPECT_THROW(mt::hausdorff(square(0, 0, 1), square(1, 0, 1), cal), ivgan::ConfigError);
}

TEST(Hausdorff, DegenerateContourThrows)
{
    EXPECT_THROW(mt::hausdorff(Contour{{{0, 0}, {1, 1}}}, square(0, 0, 1)), ivgan::Error);
}

TEST(AvgDistance, ConcentricCircles)
{
    EXPECT_NEAR(mt::avg_distance(circle(10), circle(12)) / 2.0, 1.0, 0.02);
    EXPECT_NEAR(mt::hausdorff(circle(10), circle(12)), 2.0, 0.02);
}

TEST(AvgDistance, BoundedByHausdorff)
{
    const Contour a = square(0, 0, 4), b = square(1, -0.5, 3);
    EXPECT_LE(mt::avg_distance(a, b), mt::hausdorff(a, b));
    EXPECT_NEAR(mt::avg_distance(a, b), mt::avg_distance(b, a), 1e-12);
}

TEST(EvaluateSample, TruthScoresPerfectly)
{
    const ivgan::phantom::PhantomSpec spec;
    for (std::uint64_t i = 0; i < 5; ++i) {
        const auto s = ivgan::phantom::generate_phantom(spec, i);
        const auto r = mt::evaluate_sample(s.labels, s);
        EXPECT_EQ(r.lu_jm, 1.0);
        EXPECT_EQ(r.ma_jm, 1.0);
        EXPECT_EQ(r.lu_pad, 0.0);
        EXPECT_EQ(r.ma_pad, 0.0);
        ASSERT_TRUE(r.lu_hd && r.ma_hd && r.lu_ad && r.ma_ad);
        EXPECT_LE(*r.lu_hd, 1.0);
        EXPECT_LE(*r.ma_hd, 1.0);
        EXPECT_LE(*r.lu_ad, 1.0);
        EXPECT_LE(*r.ma_ad, 1.0);
    }
}

TEST(EvaluateSample, MissingLumenLeavesDistancesAbsent)
{
    const auto s = ivgan::phantom::generate_phantom(ivgan::phantom::PhantomSpec{}, 0);
    ivgan::LabelMask all_tissue(s.labels.width, s.labels.height, 2);
    const auto r = mt::evaluate_sample(all_tissue, s);
    EXPECT_EQ(r.lu_jm, 0.0);
    EXPECT_EQ(r.lu_pad, 100.0);
    EXPECT_FALSE(r.lu_hd.has_value());
    EXPECT_FALSE(r.ma_ad.has_value());
}

TEST(Aggregate, IdenticalRecordsHaveZeroSpread)
{
    mt::MetricsRecord r;
    r.lu_jm = 0.9;
    r.lu_hd = 0.3;
    const auto s = mt::aggregate({r, r, r});
    EXPECT_EQ(s.count, 3u);
    EXPECT_NEAR(s.mean[0], 0.9, 1e-15);
    EXPECT_EQ(s.stddev[0], 0.0);
    EXPECT_EQ(s.ma_misses, 3u);
    EXPECT_EQ(s.lu_misses, 0u);
    EXPECT_TRUE(std::isnan(s.mean[5]));
}

TEST(Aggregate, MeanAndSampleStddev)
{
    std::vector<mt::MetricsRecord> rs(3);
    rs[0].lu_pad = 1;
    rs[1].lu_pad = 2;
    rs[2].lu_pad = 6;
    rs[0].lu_hd = 1.0;
    const auto s = mt::aggregate(rs);
    EXPECT_DOUBLE_EQ(s.mean[2], 3.0);
    EXPECT_DOUBLE_EQ(s.stddev[2], std::sqrt(7.0));
    EXPECT_DOUBLE_EQ(s.mean[4], 1.0);
    EXPECT_EQ(s.stddev[4], 0.0);
    EXPECT_EQ(s.lu_misses, 2u);
}

}  // namespace
