#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ivgan/metrics/metrics.hpp"
#include "ivgan/phantom/phantom.hpp"
#include "ivgan/segment/segment.hpp"
#include "ivgan/segment/svg.hpp"
#include "test_util.hpp"

namespace {

namespace sg = ivgan::segment;
using ivgan::BinaryMask;
using ivgan::Image;
using ivgan::LabelMask;
using ivgan::Rng;

BinaryMask disc(std::size_t size, double cx, double cy, double r)
{
    BinaryMask m(size, size);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
            m(x, y) = dx * dx + dy * dy <= r * r ? 1 : 0;
        }
    }
    return m;
}

Image one_hot(const LabelMask& labels)
{
    Image img(3, labels.height, labels.width, -1.0f);
    for (std::size_t y = 0; y < labels.height; ++y) {
        for (std::size_t x = 0; x < labels.width; ++x) {
            img.at(labels(x, y), y, x) = 1.0f;
        }
    }
    return img;
}

TEST(PredictLabels, OneHotRoundTrip)
{
    const auto s = ivgan::phantom::generate_phantom(ivgan::phantom::PhantomSpec{}, 2);
    EXPECT_EQ(sg::predict_labels(one_hot(s.labels)), s.labels);
    EXPECT_EQ(sg::predict_labels(s.target), s.labels);
}

TEST(PredictLabels, TiesGoToLowerClass)
{
    const Image flat(3, 2, 2, 0.0f);
    for (auto v : sg::predict_labels(flat).values) {
        EXPECT_EQ(v, 0);
    }
    Image two(3, 1, 1);
    two.values = {-1.0f, 0.5f, 0.5f};
    EXPECT_EQ(sg::predict_labels(two).values[0], 1);
}

TEST(PredictLabels, MatchesLoopOracleOnRandomInput)
{
    Rng rng(8);
    Image img(3, 7, 5);
    for (auto& v : img.values) {
        v = static_cast<float>(rng.uniform(-1, 1));
    }
    const LabelMask got = sg::predict_labels(img);
    for (std::size_t y = 0; y < 7; ++y) {
        for (std::size_t x = 0; x < 5; ++x) {
            int best = 0;
            for (int c = 1; c < 3; ++c) {
                if (img.at(c, y, x) > img.at(best, y, x)) {
                    best = c;
                }
            }
            EXPECT_EQ(got(x, y), best);
        }
    }
}

TEST(PredictLabels, WrongChannelCountThrows)
{
    EXPECT_THROW(sg::predict_labels(Image(2, 4, 4)), ivgan::ShapeError);
}

TEST(Binarize, RegionsSelectClasses)
{
    LabelMask l(3, 1);
    l.values = {0, 1, 2};
    EXPECT_EQ(sg::binarize(l, sg::Region::lumen).values, (std::vector<std::uint8_t>{1, 0, 0}));
    EXPECT_EQ(sg::binarize(l, sg::Region::lumen_plus_plaque).values, (std::vector<std::uint8_t>{1, 1, 0}));
}

TEST(Cleanup, RemovesSpeckAndFillsAnnulus)
{
    BinaryMask m = disc(32, 15, 15, 8);
    m(1, 1) = 1;     // isolated speck
    m(15, 15) = 0;   // hole
    m(14, 15) = 0;
    const BinaryMask c = sg::cleanup(m);
    EXPECT_EQ(c(1, 1), 0);
    EXPECT_EQ(c(15, 15), 1);
    EXPECT_EQ(c(14, 15), 1);
    EXPECT_EQ(c, disc(32, 15, 15, 8));
}

TEST(Cleanup, IdempotentOnRandomMasks)
{
    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        BinaryMask m(12, 10);
        for (auto& v : m.values) {
            v = rng.bernoulli(0.55) ? 1 : 0;
        }
        const BinaryMask once = sg::cleanup(m);
        EXPECT_EQ(sg::cleanup(once), once);
    }
}

TEST(Cleanup, EmptyStaysEmpty)
{
    EXPECT_EQ(sg::cleanup(BinaryMask(5, 5)).count(), 0u);
}

TEST(ExtractContour, SinglePixelIsDiamond)
{
    BinaryMask m(5, 5);
    m(2, 2) = 1;
    const auto c = sg::extract_contour(m);
    EXPECT_EQ(c.size(), 4u);
    EXPECT_DOUBLE_EQ(ivgan::area(c), 0.5);
    EXPECT_GT(ivgan::signed_area(c), 0.0);
}

TEST(ExtractContour, DiscAreaWithinThreePercent)
{
    const auto c = sg::extract_contour(disc(32, 15.5, 15.5, 10));
    EXPECT_NEAR(ivgan::area(c) / (std::numbers::pi * 100.0), 1.0, 0.03);
    EXPECT_TRUE(ivgan::is_simple_polygon(c));
}

TEST(ExtractContour, FullFrameSpansFrameWithCutCorners)
{
    const auto c = sg::extract_contour(BinaryMask(6, 4, 1));
    double minx = 1e9, maxx = -1e9, miny = 1e9, maxy = -1e9;
    for (const auto& p : c.vertices) {
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    EXPECT_DOUBLE_EQ(minx, -0.5);
    EXPECT_DOUBLE_EQ(maxx, 5.5);
    EXPECT_DOUBLE_EQ(miny, -0.5);
    EXPECT_DOUBLE_EQ(maxy, 3.5);
    EXPECT_DOUBLE_EQ(ivgan::area(c), 24.0 - 4 * 0.125);
}

TEST(ExtractContour, EmptyMaskIsRegionError)
{
    EXPECT_THROW(sg::extract_contour(BinaryMask(4, 4)), ivgan::RegionError);
}

TEST(Boundaries, RecoverPhantomContours)
{
    const ivgan::phantom::PhantomSpec spec;
    for (std::uint64_t i = 0; i < 10; ++i) {
        const auto s = ivgan::phantom::generate_phantom(spec, i);
        const auto b = sg::lu_ma_boundaries(s.labels);
        EXPECT_LE(ivgan::metrics::hausdorff(b.lu, s.lu_contour), 1.0) << i;
        EXPECT_LE(ivgan::metrics::hausdorff(b.ma, s.ma_contour), 1.0) << i;
        EXPECT_LT(ivgan::area(b.lu), ivgan::area(b.ma));
    }
}

TEST(Boundaries, NoLumenIsRegionError)
{
    LabelMask l(8, 8, 2);
    l(3, 3) = 1;
    EXPECT_THROW(sg::lu_ma_boundaries(l), ivgan::RegionError);
}

TEST(Svg, OverlayHasImageAndPolygons)
{
    const auto s = ivgan::phantom::generate_phantom(ivgan::phantom::PhantomSpec{}, 0);
    sg::OverlayContours oc;
    oc.true_lu = s.lu_contour;
    oc.true_ma = s.ma_contour;
    std::string svg = sg::overlay_svg(s.condition, oc);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("id=\"truth-lu\""), std::string::npos);
    EXPECT_EQ(svg.find("id=\"pred-lu\""), std::string::npos);
    oc.pred_lu = s.lu_contour;
    svg = sg::overlay_svg(s.condition, oc);
    EXPECT_NE(svg.find("id=\"pred-lu\""), std::string::npos);
    EXPECT_EQ(svg.substr(svg.size() - 7), "</svg>\n");
}

}  // namespace
