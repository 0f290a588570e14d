#pragma once

// Conditional patch discriminator. Input is the channel concatenation of the
// condition image and a candidate segmentation image; output is a grid of
// probabilities, one per receptive-field patch.
//
//   block i = 0..n_down-1 : conv 4x4 s2 p1 (w_{i-1} -> w_i), BN except on
//                           block 0 (which carries a bias instead), LeakyReLU
//   head                  : conv 3x3 s1 p1 (w_{n_down-1} -> 1) + bias, Sigmoid
//
// with w_i = min(base * 2^i, 8 * base).

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ivgan/error.hpp"
#include "ivgan/nets/network.hpp"

namespace ivgan::nets {

struct DiscriminatorConfig {
    std::size_t image_size = 64;
    std::size_t n_down = 4;
    std::size_t base_channels = 16;
    std::size_t condition_channels = 1;
    std::size_t candidate_channels = 3;

    std::size_t in_channels() const { return condition_channels + candidate_channels; }
    std::size_t width(std::size_t level) const { return std::min(base_channels << level, 8 * base_channels); }
    std::size_t grid_size() const { return image_size >> n_down; }

    void validate() const
    {
        if (n_down < 1 || n_down >= 32) {
            throw ConfigError("discriminator n_down must lie in [1,31], got " + std::to_string(n_down));
        }
        if (base_channels < 1) {
            throw ConfigError("discriminator base_channels must be >= 1");
        }
        if ((image_size >> n_down) < 1 || (image_size % (std::size_t{1} << n_down)) != 0) {
            throw ConfigError("discriminator: image_size " + std::to_string(image_size) +
                              " is too small for n_down " + std::to_string(n_down) +
                              " (needs a multiple of 2^n_down)");
        }
    }

    friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

template <class T>
class Discriminator : public LayerFactory<T> {
public:
    Discriminator(const DiscriminatorConfig& cfg, const Rng& rng)
        : LayerFactory<T>(rng.fork("discriminator")), cfg_(cfg)
    {
        cfg_.validate();
        std::size_t in = cfg_.in_channels();
        for (std::size_t i = 0; i < cfg_.n_down; ++i) {
            const std::string name = "block" + std::to_string(i);
            Block b;
            b.conv = this->make_conv(name + ".conv", in, cfg_.width(i), 4, {2, 1}, i == 0);
            if (i > 0) {
                b.norm = this->make_norm(name + ".bn", cfg_.width(i));
            }
            blocks_.push_back(std::move(b));
            in = cfg_.width(i);
        }
        head_ = this->make_conv("head.conv", in, 1, 3, {1, 1}, true);
    }

    const DiscriminatorConfig& config() const { return cfg_; }

    /// Probability grid [N,1,G,G] for condition u [N,1,H,W] and candidate v [N,3,H,W].
    Tensor<T> forward(const Tensor<T>& u, const Tensor<T>& v, Phase phase) const
    {
        const auto check = [&](const Tensor<T>& t, std::size_t ch, const char* what) {
            if (t.rank() != 4 || t.dim(1) != ch || t.dim(2) != cfg_.image_size || t.dim(3) != cfg_.image_size) {
                throw ShapeError(std::string("discriminator ") + what + " must be [N," + std::to_string(ch) + "," +
                                 std::to_string(cfg_.image_size) + "," + std::to_string(cfg_.image_size) +
                                 "], got " + shape_str(t.shape()));
            }
        };
        check(u, cfg_.condition_channels, "condition");
        check(v, cfg_.candidate_channels, "candidate");
        if (u.dim(0) != v.dim(0)) {
            throw ShapeError("discriminator: batch sizes differ (" + std::to_string(u.dim(0)) + " vs " +
                             std::to_string(v.dim(0)) + ")");
        }
        Tensor<T> x = ops::concat(u, v, 1);
        for (const Block& b : blocks_) {
            x = b.conv(x);
            if (b.norm) {
                x = (*b.norm)(x, phase);
            }
            x = ops::leaky_relu(x, static_cast<T>(kLeakySlope));
        }
        return ops::sigmoid_act(head_(x));
    }

private:
    struct Block {
        Conv<T> conv;
        std::optional<BatchNorm<T>> norm;
    };

    DiscriminatorConfig cfg_;
    std::vector<Block> blocks_;
    Conv<T> head_;
};

}  // namespace ivgan::nets
