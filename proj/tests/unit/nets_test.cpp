#include <gtest/gtest.h>

#include "ivgan/nets/discriminator.hpp"
#include "ivgan/nets/generator.hpp"
#include "ivgan/selftest/suites.hpp"

namespace {

namespace nets = ivgan::nets;
using ivgan::Rng;
using ivgan::Shape;
using ivgan::Tensor;
using nets::GeneratorVariant;

constexpr GeneratorVariant kAllVariants[] = {GeneratorVariant::unet, GeneratorVariant::encoder_decoder,
                                             GeneratorVariant::hourglass_no_reinject,
                                             GeneratorVariant::hourglass_reinject};

nets::GeneratorConfig small_config(GeneratorVariant v, std::size_t image = 8, std::size_t depth = 2,
                                   std::size_t base = 2)
{
    nets::GeneratorConfig c;
    c.variant = v;
    c.image_size = image;
    c.depth = depth;
    c.base_channels = base;
    return c;
}

Tensor<float> random_input(std::size_t n, std::size_t c, std::size_t hw, std::uint64_t seed)
{
    Rng rng(seed);
    Tensor<float> t(Shape{n, c, hw, hw});
    for (auto& v : t.mutable_data()) {
        v = static_cast<float>(rng.uniform(-1, 1));
    }
    return t;
}

/// Exposes the protected layer factory for counting single layers.
struct SingleLayer : nets::LayerFactory<float> {
    SingleLayer(std::size_t in, std::size_t out, std::size_t k, bool bias) : nets::LayerFactory<float>(Rng(1))
    {
        make_conv("conv", in, out, k, {1, 0}, bias);
    }
};

TEST(ParamCount, SingleConvLayers)
{
    EXPECT_EQ(SingleLayer(1, 1, 1, false).param_count(), 1u);
    EXPECT_EQ(SingleLayer(3, 8, 4, true).param_count(), 392u);
}

TEST(ParamCount, UNetDepthTwoBaseTwoByHand)
{
    // enc0: 1*2*16 weights + BN(2) = 36; enc1: 2*4*16 + bias 4 = 132;
    // dec1: 4*2*16 + BN(2) = 132; out: (2+2)*3*16 + 3 = 195.
    const nets::Generator<float> g(small_config(GeneratorVariant::unet), Rng(0));
    EXPECT_EQ(g.param_count(), 495u);
}

TEST(ParamCount, EnumeratedTensorsSumToCount)
{
    for (auto v : kAllVariants) {
        const nets::Generator<float> g(small_config(v, 16, 3, 2), Rng(0));
        std::size_t total = 0;
        for (const auto& p : g.parameters()) {
            total += p.tensor.numel();
        }
        EXPECT_EQ(total, g.param_count()) << nets::to_string(v);
        EXPECT_EQ(g.param_count(), ivgan::selftest::closed_form_param_count(g.config())) << nets::to_string(v);
    }
}

TEST(ParamCount, EncoderDecoderSmallerThanUNet)
{
    for (std::size_t depth : {2, 3, 4}) {
        for (std::size_t base : {1, 2, 4, 16}) {
            const nets::Generator<float> u(small_config(GeneratorVariant::unet, 16, depth, base), Rng(0));
            const nets::Generator<float> e(small_config(GeneratorVariant::encoder_decoder, 16, depth, base), Rng(0));
            EXPECT_LT(e.param_count(), u.param_count()) << depth << "/" << base;
        }
    }
}

TEST(ParamCount, ReinjectAddsExactlyReinjectionConvs)
{
    for (std::size_t stacks : {2, 3}) {
        auto cfg = small_config(GeneratorVariant::hourglass_no_reinject, 16, 3, 2);
        cfg.n_stacks = stacks;
        const nets::Generator<float> plain(cfg, Rng(0));
        cfg.variant = GeneratorVariant::hourglass_reinject;
        const nets::Generator<float> reinject(cfg, Rng(0));
        std::size_t reinjection = 0;
        for (const auto& p : reinject.parameters()) {
            if (p.name.find("reinject") != std::string::npos) {
                reinjection += p.tensor.numel();
            }
        }
        const std::size_t c0 = 2;
        EXPECT_EQ(reinjection, (stacks - 1) * ((c0 * c0 + c0) + (3 * c0 + c0)));
        EXPECT_EQ(reinject.param_count() - reinjection, plain.param_count());
    }
}

TEST(Generator, OutputShapeForEveryVariant)
{
    for (auto v : kAllVariants) {
        const nets::Generator<float> g(small_config(v, 4, 2, 1), Rng(0));
        Rng noise(1);
        const auto out = g.forward(random_input(2, 1, 4, 3), noise, nets::Phase::train);
        EXPECT_EQ(out.prediction.shape(), (Shape{2, 3, 4, 4})) << nets::to_string(v);
    }
}

TEST(Generator, OutputsStrictlyInsideTanhRange)
{
    for (auto v : kAllVariants) {
        const nets::Generator<float> g(small_config(v, 16, 3, 4), Rng(5));
        Rng noise(2);
        const auto out = g.forward(random_input(2, 1, 16, 4), noise, nets::Phase::train);
        for (float x : out.prediction.data()) {
            EXPECT_GT(x, -1.0f);
            EXPECT_LT(x, 1.0f);
        }
    }
}

TEST(Generator, DropoutNoiseIsSeededInEval)
{
    const nets::Generator<float> g(small_config(GeneratorVariant::unet, 16, 4, 4), Rng(0));
    const auto u = random_input(1, 1, 16, 9);
    Rng a(1), b(1), c(2);
    const auto ya = g.forward(u, a, nets::Phase::eval).prediction;
    const auto yb = g.forward(u, b, nets::Phase::eval).prediction;
    const auto yc = g.forward(u, c, nets::Phase::eval).prediction;
    EXPECT_EQ(ya.values(), yb.values());
    EXPECT_NE(ya.values(), yc.values());
}

TEST(Generator, ChannelNoiseModeConcatenatesGaussianChannel)
{
    auto cfg = small_config(GeneratorVariant::unet, 16, 3, 2);
    cfg.noise_mode = nets::NoiseMode::channel;
    const nets::Generator<float> g(cfg, Rng(0));
    EXPECT_EQ(cfg.input_channels(), 2u);
    EXPECT_EQ(g.param_count(), ivgan::selftest::closed_form_param_count(cfg));
    const auto u = random_input(1, 1, 16, 9);
    Rng a(1), b(1), c(2);
    EXPECT_EQ(g.forward(u, a, nets::Phase::eval).prediction.values(),
              g.forward(u, b, nets::Phase::eval).prediction.values());
    EXPECT_NE(g.forward(u, a, nets::Phase::eval).prediction.values(),
              g.forward(u, c, nets::Phase::eval).prediction.values());
}

TEST(Generator, HourglassReturnsOnePredictionPerStack)
{
    for (auto v : {GeneratorVariant::hourglass_no_reinject, GeneratorVariant::hourglass_reinject}) {
        const nets::Generator<float> g(small_config(v, 8, 2, 2), Rng(0));
        Rng noise(1);
        const auto out = g.forward(random_input(2, 1, 8, 3), noise, nets::Phase::train);
        ASSERT_EQ(out.intermediates.size(), 2u);
        for (const auto& p : out.intermediates) {
            EXPECT_EQ(p.shape(), (Shape{2, 3, 8, 8}));
        }
        EXPECT_EQ(out.intermediates.back().values(), out.prediction.values());
    }
    const nets::Generator<float> u(small_config(GeneratorVariant::unet), Rng(0));
    Rng noise(1);
    EXPECT_TRUE(u.forward(random_input(1, 1, 8, 3), noise, nets::Phase::train).intermediates.empty());
}

TEST(Generator, WrongInputShapeThrows)
{
    const nets::Generator<float> g(small_config(GeneratorVariant::unet), Rng(0));
    Rng noise(1);
    EXPECT_THROW(g.forward(random_input(1, 1, 16, 3), noise, nets::Phase::train), ivgan::ShapeError);
}

TEST(Generator, InvalidConfigsRejected)
{
    auto cfg = small_config(GeneratorVariant::unet, 8, 4, 2);  // 8 >> 4 < 1
    EXPECT_THROW(cfg.validate(), ivgan::ConfigError);
    cfg = small_config(GeneratorVariant::unet);
    cfg.dropout_p = 1.0;
    EXPECT_THROW(cfg.validate(), ivgan::ConfigError);
    EXPECT_THROW(nets::parse_variant("resnet"), ivgan::ConfigError);
}

TEST(Generator, SameSeedSameWeights)
{
    const nets::Generator<float> a(small_config(GeneratorVariant::hourglass_reinject), Rng(4));
    const nets::Generator<float> b(small_config(GeneratorVariant::hourglass_reinject), Rng(4));
    ASSERT_EQ(a.parameters().size(), b.parameters().size());
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        EXPECT_EQ(a.parameters()[i].tensor.values(), b.parameters()[i].tensor.values());
    }
}

nets::DiscriminatorConfig disc_config(std::size_t image, std::size_t n_down, std::size_t base)
{
    nets::DiscriminatorConfig c;
    c.image_size = image;
    c.n_down = n_down;
    c.base_channels = base;
    return c;
}

TEST(Discriminator, GridShapeAndProbabilityRange)
{
    const nets::Discriminator<float> d(disc_config(64, 4, 8), Rng(0));
    const auto s = d.forward(random_input(2, 1, 64, 1), random_input(2, 3, 64, 2), nets::Phase::train);
    EXPECT_EQ(s.shape(), (Shape{2, 1, 4, 4}));
    for (float v : s.data()) {
        EXPECT_GT(v, 0.0f);
        EXPECT_LT(v, 1.0f);
    }
}

TEST(Discriminator, ZeroHeadGivesOneHalf)
{
    const nets::Discriminator<float> d(disc_config(16, 2, 4), Rng(0));
    for (const auto& p : d.parameters()) {
        if (p.name.rfind("head.", 0) == 0) {
            auto t = p.tensor;
            for (auto& v : t.mutable_data()) {
                v = 0.0f;
            }
        }
    }
    const auto s = d.forward(random_input(1, 1, 16, 1), random_input(1, 3, 16, 2), nets::Phase::train);
    for (float v : s.data()) {
        EXPECT_EQ(v, 0.5f);
    }
}

TEST(Discriminator, EvalMatchesTrainOnceRunningStatsEqualBatchStats)
{
    const nets::Discriminator<double> d(disc_config(16, 3, 2), Rng(0));
    Rng rng(3);
    const auto u = ivgan::selftest::random_tensor(rng, Shape{3, 1, 16, 16});
    const auto v = ivgan::selftest::random_tensor(rng, Shape{3, 3, 16, 16});
    // Parameters are fixed, so every train-mode pass sees the same batch
    // statistics and the running averages converge to them geometrically.
    Tensor<double> train_out;
    for (int i = 0; i < 500; ++i) {
        train_out = d.forward(u, v, nets::Phase::train);
    }
    const auto eval_out = d.forward(u, v, nets::Phase::eval);
    for (std::size_t i = 0; i < eval_out.numel(); ++i) {
        EXPECT_NEAR(eval_out.data()[i], train_out.data()[i], 1e-9);
    }
}

TEST(Discriminator, RejectsIndivisibleImage)
{
    EXPECT_THROW(nets::Discriminator<float>(disc_config(24, 4, 2), Rng(0)), ivgan::ConfigError);
}

TEST(Discriminator, RejectsMismatchedBatches)
{
    const nets::Discriminator<float> d(disc_config(16, 2, 2), Rng(0));
    EXPECT_THROW(d.forward(random_input(1, 1, 16, 1), random_input(2, 3, 16, 2), nets::Phase::train),
                 ivgan::ShapeError);
}

}  // namespace
