#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ivgan/diffcore/conv.hpp"
#include "ivgan/diffcore/ops.hpp"
#include "ivgan/diffcore/rng.hpp"
#include "ivgan/diffcore/tensor.hpp"

namespace ivgan::nets {

/// How a forward pass treats batch norm and dropout.
enum class Phase {
    train,             // batch statistics (running stats updated), dropout on
    eval,              // running statistics; dropout only as generator noise
    eval_batch_stats,  // batch statistics without updating running stats
};

inline ops::NormMode norm_mode(Phase p)
{
    switch (p) {
    case Phase::train:
        return ops::NormMode::train;
    case Phase::eval:
        return ops::NormMode::eval;
    case Phase::eval_batch_stats:
        return ops::NormMode::batch;
    }
    return ops::NormMode::eval;
}

inline constexpr double kInitStd = 0.02;
inline constexpr double kLeakySlope = 0.2;

template <class T>
struct NamedTensor {
    std::string name;
    Tensor<T> tensor;
};

/// Owns the named parameters (trainable) and buffers (batch-norm running
/// statistics) of a model. Non-copyable because tensors are shared handles.
template <class T>
class Network {
public:
    Network() = default;
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;
    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    const std::vector<NamedTensor<T>>& parameters() const { return params_; }
    const std::vector<NamedTensor<T>>& buffers() const { return buffers_; }

    std::size_t param_count() const
    {
        std::size_t n = 0;
        for (const auto& p : params_) {
            n += p.tensor.numel();
        }
        return n;
    }

    void zero_grad()
    {
        for (auto& p : params_) {
            p.tensor.zero_grad();
        }
    }

protected:
    Tensor<T> add_param(const std::string& name, Shape shape, double mean, double stddev, const Rng& rng)
    {
        require_unique(name);
        Tensor<T> t(std::move(shape), T{0}, true);
        if (stddev > 0.0) {
            Rng r = rng.fork(name);
            for (auto& v : t.mutable_data()) {
                v = static_cast<T>(r.normal(mean, stddev));
            }
        } else {
            for (auto& v : t.mutable_data()) {
                v = static_cast<T>(mean);
            }
        }
        params_.push_back({name, t});
        return t;
    }

    Tensor<T> add_buffer(const std::string& name, std::size_t size, T fill)
    {
        require_unique(name);
        Tensor<T> t(Shape{size}, fill, false);
        buffers_.push_back({name, t});
        return t;
    }

private:
    void require_unique(const std::string& name)
    {
        if (!names_.insert(name).second) {
            throw Error("duplicate parameter name '" + name + "'");
        }
    }

    std::vector<NamedTensor<T>> params_;
    std::vector<NamedTensor<T>> buffers_;
    std::unordered_set<std::string> names_;
};

// ---------------------------------------------------------------------------
// Layers. Each holds handles to tensors registered in the owning Network.

template <class T>
struct Conv {
    Tensor<T> weight;
    Tensor<T> bias;  // undefined when followed by batch norm
    ops::ConvGeometry geometry;
    bool transpose = false;

    Tensor<T> operator()(const Tensor<T>& x) const
    {
        return transpose ? ops::conv2d_transpose(x, weight, bias, geometry) : ops::conv2d(x, weight, bias, geometry);
    }
};

template <class T>
struct BatchNorm {
    Tensor<T> gamma;
    Tensor<T> beta;
    Tensor<T> running_mean;
    Tensor<T> running_var;

    Tensor<T> operator()(const Tensor<T>& x, Phase phase) const
    {
        // Running statistics are buffers updated in place.
        auto rm = running_mean;
        auto rv = running_var;
        return ops::batch_norm(x, gamma, beta, norm_mode(phase), rm.mutable_data(), rv.mutable_data());
    }
};

/// Registers layers on a Network under a common prefix.
template <class T>
class LayerFactory : public Network<T> {
protected:
    explicit LayerFactory(Rng rng) : rng_(rng) {}

    Conv<T> make_conv(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
                      ops::ConvGeometry geometry, bool bias, bool transpose = false)
    {
        Conv<T> c;
        const Shape shape = transpose ? Shape{in, out, kernel, kernel} : Shape{out, in, kernel, kernel};
        c.weight = this->add_param(name + ".weight", shape, 0.0, kInitStd, rng_);
        if (bias) {
            c.bias = this->add_param(name + ".bias", Shape{out}, 0.0, 0.0, rng_);
        }
        c.geometry = geometry;
        c.transpose = transpose;
        return c;
    }

    BatchNorm<T> make_norm(const std::string& name, std::size_t channels)
    {
        BatchNorm<T> bn;
        bn.gamma = this->add_param(name + ".gamma", Shape{channels}, 1.0, kInitStd, rng_);
        bn.beta = this->add_param(name + ".beta", Shape{channels}, 0.0, 0.0, rng_);
        bn.running_mean = this->add_buffer(name + ".running_mean", channels, T{0});
        bn.running_var = this->add_buffer(name + ".running_var", channels, T{1});
        return bn;
    }

private:
    Rng rng_;
};

}  // namespace ivgan::nets
