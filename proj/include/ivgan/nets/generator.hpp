#pragma once

// Image-to-image generators mapping a condition image to a 3-channel class
// image in (-1,1).
//
// Notation: D = depth, e_i = min(base * 2^i, cap), k = 4 (stride-2 convs).
//
// UNet / EncoderDecoder
//   encoder i = 0..D-1 : conv k s2 (e_{i-1} -> e_i), BN + LeakyReLU(0.2);
//                        the innermost block (i = D-1) has a bias and no BN
//                        because its output can be 1x1.
//   decoder j = D-1..1 : convT k s2 (in_j -> e_{j-1}), BN, Dropout in the
//                        three innermost blocks, ReLU.
//                        in_{D-1} = e_{D-1}; otherwise 2 e_j (UNet skip
//                        concatenation) or e_j (EncoderDecoder).
//   output             : convT k s2 (2 e_0 | e_0 -> 3) + bias, Tanh.
//
// Hourglass (c_i = min(base * 2^i, cap), i = 0..D)
//   stem               : conv 3x3 (in -> c_0), BN, LeakyReLU.
//   per stack          : hourglass over levels i = 0..D-1 with
//                          skip  = residual block at c_i (two 3x3 convs + BN)
//                          down  = conv k s2 (c_i -> c_{i+1}) + BN (bias, no
//                                  BN at the innermost level), LeakyReLU
//                          inner = next level, or at the bottom a 3x3 conv
//                                  (c_D -> c_D) + bias, LeakyReLU
//                          up    = convT k s2 (c_{i+1} -> c_i), BN, Dropout in
//                                  the three innermost levels, ReLU
//                          out   = skip + up
//                        then a 1x1 head (c_0 -> 3) + bias, Tanh.
//   chaining           : NoReinject feeds stack s's features to stack s+1.
//                        Reinject feeds x_s + R_f(h_s) + R_p(p_s), with 1x1
//                        convs R_f (c_0 -> c_0) and R_p (3 -> c_0), both with
//                        bias. Both variants return every stack's prediction.

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ivgan/error.hpp"
#include "ivgan/nets/network.hpp"

namespace ivgan::nets {

enum class GeneratorVariant { unet, encoder_decoder, hourglass_no_reinject, hourglass_reinject };
enum class NoiseMode { dropout, channel };

inline const char* to_string(GeneratorVariant v)
{
    switch (v) {
    case GeneratorVariant::unet:
        return "unet";
    case GeneratorVariant::encoder_decoder:
        return "encoder_decoder";
    case GeneratorVariant::hourglass_no_reinject:
        return "hourglass_no_reinject";
    case GeneratorVariant::hourglass_reinject:
        return "hourglass_reinject";
    }
    return "?";
}

inline GeneratorVariant parse_variant(const std::string& s)
{
    for (auto v : {GeneratorVariant::unet, GeneratorVariant::encoder_decoder, GeneratorVariant::hourglass_no_reinject,
                   GeneratorVariant::hourglass_reinject}) {
        if (s == to_string(v)) {
            return v;
        }
    }
    throw ConfigError("unknown generator variant '" + s +
                      "' (expected unet, encoder_decoder, hourglass_no_reinject, hourglass_reinject)");
}

inline const char* to_string(NoiseMode m) { return m == NoiseMode::dropout ? "dropout" : "channel"; }

inline NoiseMode parse_noise_mode(const std::string& s)
{
    if (s == "dropout") {
        return NoiseMode::dropout;
    }
    if (s == "channel") {
        return NoiseMode::channel;
    }
    throw ConfigError("unknown noise_mode '" + s + "' (expected dropout or channel)");
}

inline bool is_hourglass(GeneratorVariant v)
{
    return v == GeneratorVariant::hourglass_no_reinject || v == GeneratorVariant::hourglass_reinject;
}

struct GeneratorConfig {
    GeneratorVariant variant = GeneratorVariant::unet;
    std::size_t image_size = 64;
    std::size_t depth = 0;  // 0 selects log2(image_size)
    std::size_t base_channels = 16;
    std::size_t channel_cap = 0;  // 0 selects 8 * base_channels
    double dropout_p = 0.5;
    NoiseMode noise_mode = NoiseMode::dropout;
    std::size_t n_stacks = 2;
    std::size_t in_channels = 1;  // condition channels
    std::size_t out_channels = 3;

    std::size_t resolved_depth() const
    {
        if (depth != 0) {
            return depth;
        }
        std::size_t d = 0;
        while ((std::size_t{1} << (d + 1)) <= image_size) {
            ++d;
        }
        return d;
    }
    std::size_t resolved_cap() const { return channel_cap != 0 ? channel_cap : 8 * base_channels; }
    std::size_t input_channels() const { return in_channels + (noise_mode == NoiseMode::channel ? 1 : 0); }
    std::size_t width(std::size_t level) const
    {
        const std::size_t w = base_channels << std::min<std::size_t>(level, 40);
        return std::min(w, resolved_cap());
    }

    void validate() const
    {
        const std::size_t d = resolved_depth();
        if (d < 2) {
            throw ConfigError("generator depth must be >= 2, got " + std::to_string(d));
        }
        if (d >= 40 || (std::size_t{1} << d) > image_size) {
            throw ConfigError("generator depth " + std::to_string(d) + " needs 2^depth <= image_size (" +
                              std::to_string(image_size) + ")");
        }
        if (base_channels < 1) {
            throw ConfigError("generator base_channels must be >= 1");
        }
        if (n_stacks < 1) {
            throw ConfigError("generator n_stacks must be >= 1");
        }
        if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
            throw ConfigError("generator dropout_p must lie in [0,1)");
        }
        if (in_channels < 1 || out_channels < 1) {
            throw ConfigError("generator channel counts must be positive");
        }
    }

    friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

template <class T>
struct GeneratorOutput {
    Tensor<T> prediction;                // [N,3,H,W]
    std::vector<Tensor<T>> intermediates;  // per-stack predictions (hourglass only)
};

template <class T>
class Generator : public LayerFactory<T> {
public:
    Generator(const GeneratorConfig& cfg, const Rng& rng) : LayerFactory<T>(rng.fork("generator")), cfg_(cfg)
    {
        cfg_.validate();
        if (is_hourglass(cfg_.variant)) {
            build_hourglass();
        } else {
            build_encoder_decoder();
        }
    }

    const GeneratorConfig& config() const { return cfg_; }

    /// Noise c: dropout mode keeps dropout active in every phase; channel mode
    /// appends a standard-normal channel to u and uses dropout only in train.
    GeneratorOutput<T> forward(const Tensor<T>& u, Rng& rng, Phase phase) const
    {
        if (u.rank() != 4 || u.dim(1) != cfg_.in_channels || u.dim(2) != cfg_.image_size ||
            u.dim(3) != cfg_.image_size) {
            throw ShapeError("generator expects input [N," + std::to_string(cfg_.in_channels) + "," +
                             std::to_string(cfg_.image_size) + "," + std::to_string(cfg_.image_size) + "], got " +
                             shape_str(u.shape()));
        }
        Tensor<T> x = u;
        if (cfg_.noise_mode == NoiseMode::channel) {
            Tensor<T> noise(Shape{u.dim(0), 1, u.dim(2), u.dim(3)});
            for (auto& v : noise.mutable_data()) {
                v = static_cast<T>(rng.normal());
            }
            x = ops::concat(u, noise, 1);
        }
        const bool dropout_on = phase == Phase::train || cfg_.noise_mode == NoiseMode::dropout;
        return is_hourglass(cfg_.variant) ? forward_hourglass(x, rng, phase, dropout_on)
                                          : forward_encoder_decoder(x, rng, phase, dropout_on);
    }

private:
    struct EncoderBlock {
        Conv<T> conv;
        std::optional<BatchNorm<T>> norm;
    };
    struct DecoderBlock {
        Conv<T> conv;
        BatchNorm<T> norm;
        bool dropout = false;
    };
    struct ResidualBlock {
        Conv<T> conv1, conv2;
        BatchNorm<T> norm1, norm2;
    };
    struct HourglassLevel {
        ResidualBlock skip;
        Conv<T> down;
        std::optional<BatchNorm<T>> down_norm;
        Conv<T> up;
        BatchNorm<T> up_norm;
        bool dropout = false;
    };
    struct Stack {
        std::vector<HourglassLevel> levels;
        Conv<T> bottom;
        Conv<T> head;
        std::optional<Conv<T>> reinject_features;
        std::optional<Conv<T>> reinject_prediction;
    };

    static constexpr ops::ConvGeometry kDown{2, 1};
    static constexpr ops::ConvGeometry kSame{1, 1};
    static constexpr ops::ConvGeometry kPointwise{1, 0};

    bool has_skips() const { return cfg_.variant == GeneratorVariant::unet; }

    void build_encoder_decoder()
    {
        const std::size_t d = cfg_.resolved_depth();
        std::size_t in = cfg_.input_channels();
        for (std::size_t i = 0; i < d; ++i) {
            const std::string name = "enc" + std::to_string(i);
            const bool innermost = i + 1 == d;
            EncoderBlock b;
            b.conv = this->make_conv(name + ".conv", in, cfg_.width(i), 4, kDown, innermost);
            if (!innermost) {
                b.norm = this->make_norm(name + ".bn", cfg_.width(i));
            }
            encoder_.push_back(std::move(b));
            in = cfg_.width(i);
        }
        for (std::size_t j = d - 1; j >= 1; --j) {
            const std::string name = "dec" + std::to_string(j);
            const std::size_t dec_in = (j + 1 == d) ? cfg_.width(j) : (has_skips() ? 2 : 1) * cfg_.width(j);
            DecoderBlock b;
            b.conv = this->make_conv(name + ".conv", dec_in, cfg_.width(j - 1), 4, kDown, false, true);
            b.norm = this->make_norm(name + ".bn", cfg_.width(j - 1));
            b.dropout = j + 3 >= d;
            decoder_.push_back(std::move(b));
        }
        const std::size_t out_in = (has_skips() ? 2 : 1) * cfg_.width(0);
        output_ = this->make_conv("out.conv", out_in, cfg_.out_channels, 4, kDown, true, true);
    }

    GeneratorOutput<T> forward_encoder_decoder(const Tensor<T>& input, Rng& rng, Phase phase, bool dropout_on) const
    {
        std::vector<Tensor<T>> skips;
        Tensor<T> x = input;
        for (const auto& b : encoder_) {
            x = b.conv(x);
            if (b.norm) {
                x = (*b.norm)(x, phase);
            }
            x = ops::leaky_relu(x, static_cast<T>(kLeakySlope));
            skips.push_back(x);
        }
        // skips.back() is the bottleneck itself.
        std::size_t level = encoder_.size() - 1;
        for (const auto& b : decoder_) {
            if (has_skips() && level + 1 < encoder_.size()) {
                x = ops::concat(x, skips[level], 1);
            }
            x = b.norm(b.conv(x), phase);
            if (b.dropout) {
                x = ops::dropout(x, cfg_.dropout_p, rng, dropout_on);
            }
            x = ops::relu(x);
            --level;
        }
        if (has_skips()) {
            x = ops::concat(x, skips[0], 1);
        }
        return {ops::tanh_act(output_(x)), {}};
    }

    void build_hourglass()
    {
        const std::size_t d = cfg_.resolved_depth();
        const std::size_t c0 = cfg_.width(0);
        stem_conv_ = this->make_conv("stem.conv", cfg_.input_channels(), c0, 3, kSame, false);
        stem_norm_ = this->make_norm("stem.bn", c0);
        for (std::size_t s = 0; s < cfg_.n_stacks; ++s) {
            const std::string sp = "stack" + std::to_string(s);
            Stack st;
            for (std::size_t i = 0; i < d; ++i) {
                const std::string lp = sp + ".level" + std::to_string(i);
                const std::size_t ci = cfg_.width(i);
                const std::size_t cn = cfg_.width(i + 1);
                const bool innermost = i + 1 == d;
                HourglassLevel lv;
                lv.skip.conv1 = this->make_conv(lp + ".skip.conv1", ci, ci, 3, kSame, false);
                lv.skip.norm1 = this->make_norm(lp + ".skip.bn1", ci);
                lv.skip.conv2 = this->make_conv(lp + ".skip.conv2", ci, ci, 3, kSame, false);
                lv.skip.norm2 = this->make_norm(lp + ".skip.bn2", ci);
                lv.down = this->make_conv(lp + ".down.conv", ci, cn, 4, kDown, innermost);
                if (!innermost) {
                    lv.down_norm = this->make_norm(lp + ".down.bn", cn);
                }
                lv.up = this->make_conv(lp + ".up.conv", cn, ci, 4, kDown, false, true);
                lv.up_norm = this->make_norm(lp + ".up.bn", ci);
                lv.dropout = i + 3 >= d;
                st.levels.push_back(std::move(lv));
            }
            st.bottom = this->make_conv(sp + ".bottom.conv", cfg_.width(d), cfg_.width(d), 3, kSame, true);
            st.head = this->make_conv(sp + ".head.conv", c0, cfg_.out_channels, 1, kPointwise, true);
            if (cfg_.variant == GeneratorVariant::hourglass_reinject && s + 1 < cfg_.n_stacks) {
                st.reinject_features = this->make_conv(sp + ".reinject.features", c0, c0, 1, kPointwise, true);
                st.reinject_prediction =
                    this->make_conv(sp + ".reinject.prediction", cfg_.out_channels, c0, 1, kPointwise, true);
            }
            stacks_.push_back(std::move(st));
        }
    }

    Tensor<T> residual(const ResidualBlock& b, const Tensor<T>& x, Phase phase) const
    {
        Tensor<T> y = ops::leaky_relu(b.norm1(b.conv1(x), phase), static_cast<T>(kLeakySlope));
        y = b.norm2(b.conv2(y), phase);
        return ops::leaky_relu(ops::add(x, y), static_cast<T>(kLeakySlope));
    }

    Tensor<T> hourglass(const Stack& st, std::size_t level, const Tensor<T>& x, Rng& rng, Phase phase,
                        bool dropout_on) const
    {
        const HourglassLevel& lv = st.levels[level];
        const Tensor<T> skip = residual(lv.skip, x, phase);
        Tensor<T> y = lv.down(x);
        if (lv.down_norm) {
            y = (*lv.down_norm)(y, phase);
        }
        y = ops::leaky_relu(y, static_cast<T>(kLeakySlope));
        if (level + 1 < st.levels.size()) {
            y = hourglass(st, level + 1, y, rng, phase, dropout_on);
        } else {
            y = ops::leaky_relu(st.bottom(y), static_cast<T>(kLeakySlope));
        }
        y = lv.up_norm(lv.up(y), phase);
        if (lv.dropout) {
            y = ops::dropout(y, cfg_.dropout_p, rng, dropout_on);
        }
        y = ops::relu(y);
        return ops::add(skip, y);
    }

    GeneratorOutput<T> forward_hourglass(const Tensor<T>& input, Rng& rng, Phase phase, bool dropout_on) const
    {
        GeneratorOutput<T> out;
        Tensor<T> x = ops::leaky_relu(stem_norm_(stem_conv_(input), phase), static_cast<T>(kLeakySlope));
        for (const Stack& st : stacks_) {
            const Tensor<T> features = hourglass(st, 0, x, rng, phase, dropout_on);
            const Tensor<T> pred = ops::tanh_act(st.head(features));
            out.intermediates.push_back(pred);
            if (st.reinject_features) {
                x = ops::add(ops::add(x, (*st.reinject_features)(features)), (*st.reinject_prediction)(pred));
            } else {
                x = features;
            }
        }
        out.prediction = out.intermediates.back();
        return out;
    }

    GeneratorConfig cfg_;
    // Encoder-decoder variants
    std::vector<EncoderBlock> encoder_;
    std::vector<DecoderBlock> decoder_;
    Conv<T> output_;
    // Hourglass variants
    Conv<T> stem_conv_;
    BatchNorm<T> stem_norm_;
    std::vector<Stack> stacks_;
};

}  // namespace ivgan::nets
