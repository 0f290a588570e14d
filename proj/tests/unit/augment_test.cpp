#include <gtest/gtest.h>

#include "ivgan/augment/augment.hpp"
#include "test_util.hpp"

namespace {

namespace ag = ivgan::augment;
namespace ph = ivgan::phantom;
using ivgan::area;

const ph::Sample& sample0()
{
    static const ph::Sample s = ph::generate_phantom(ph::PhantomSpec{}, 0);
    return s;
}

TEST(Rotate, ZeroAngleIsIdentity)
{
    EXPECT_EQ(ag::rotate_sample(sample0(), 0.0), sample0());
}

TEST(Rotate, FourQuarterTurnsRestoreLabels)
{
    ph::Sample s = sample0();
    for (int i = 0; i < 4; ++i) {
        s = ag::rotate_sample(s, 90.0);
    }
    EXPECT_EQ(s.labels, sample0().labels);
    EXPECT_EQ(s.condition, sample0().condition);
}

TEST(Rotate, ArbitraryAnglePreservesContourArea)
{
    const ph::Sample r = ag::rotate_sample(sample0(), 37.0);
    EXPECT_NEAR(area(r.lu_contour), area(sample0().lu_contour), 1e-9);
    EXPECT_NEAR(area(r.ma_contour), area(sample0().ma_contour), 1e-9);
}

TEST(Rotate, RotatedLabelsFollowRotatedContours)
{
    const ph::Sample r = ag::rotate_sample(sample0(), 37.0);
    std::size_t lumen = 0;
    for (auto v : r.labels.values) {
        lumen += v == 0;
    }
    EXPECT_NEAR(static_cast<double>(lumen) / area(r.lu_contour), 1.0, 0.03);
    EXPECT_TRUE(ivgan::test::labels_nested(r.labels));
}

TEST(Rotate, OutOfRangeAngleThrows)
{
    EXPECT_THROW(ag::rotate_sample(sample0(), 360.0), ivgan::ConfigError);
    EXPECT_THROW(ag::rotate_sample(sample0(), -1.0), ivgan::ConfigError);
}

TEST(Scale, UnitFactorIsIdentity)
{
    EXPECT_EQ(ag::scale_sample(sample0(), 1.0), sample0());
}

TEST(Scale, AreaScalesByFactorSquared)
{
    for (double f : {0.8, 0.9, 1.1, 1.2}) {
        const ph::Sample s = ag::scale_sample(sample0(), f);
        EXPECT_NEAR(area(s.lu_contour), f * f * area(sample0().lu_contour), 1e-9);
        EXPECT_NEAR(area(s.ma_contour), f * f * area(sample0().ma_contour), 1e-9);
    }
}

TEST(Scale, NestingPreserved)
{
    for (std::uint64_t i = 0; i < 5; ++i) {
        const auto base = ph::generate_phantom(ph::PhantomSpec{}, i);
        for (double f : {0.7, 0.9, 1.1}) {
            EXPECT_TRUE(ivgan::test::labels_nested(ag::scale_sample(base, f).labels)) << i << " " << f;
        }
    }
}

TEST(Scale, OutOfRangeFactorThrows)
{
    EXPECT_THROW(ag::scale_sample(sample0(), 2.0), ivgan::ConfigError);
}

TEST(AugmentDataset, NoAugmentationLeavesInputUnchanged)
{
    const auto d = ph::make_dataset(ph::PhantomSpec{}, 3, 1, 1);
    EXPECT_EQ(ag::augment_dataset(d.train, 0, {}, 5), d.train);
}

TEST(AugmentDataset, CountsMultiply)
{
    const auto d = ph::make_dataset(ph::PhantomSpec{}, 4, 1, 1);
    const auto out = ag::augment_dataset(d.train, 3, {0.9, 1.1}, 5);
    EXPECT_EQ(out.size(), 24u);
}

TEST(AugmentDataset, DeterministicForSeed)
{
    const auto d = ph::make_dataset(ph::PhantomSpec{}, 2, 1, 1);
    EXPECT_EQ(ag::augment_dataset(d.train, 2, {0.9}, 5), ag::augment_dataset(d.train, 2, {0.9}, 5));
}

TEST(AugmentDataset, EveryOutputSatisfiesSampleInvariants)
{
    const auto d = ph::make_dataset(ph::PhantomSpec{}, 4, 1, 1);
    for (const auto& s : ag::augment_dataset(d.train, 3, {0.9, 1.1}, 11)) {
        EXPECT_TRUE(ivgan::test::labels_nested(s.labels)) << "index " << s.index;
        EXPECT_EQ(s.target, ph::target_from_labels(s.labels));
        EXPECT_GT(ivgan::signed_area(s.lu_contour), 0.0);
        EXPECT_LT(area(s.lu_contour), area(s.ma_contour));
        for (float v : s.condition.values) {
            EXPECT_GE(v, -1.0f);
            EXPECT_LE(v, 1.0f);
        }
    }
}

}  // namespace
