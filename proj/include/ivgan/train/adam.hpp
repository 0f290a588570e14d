#pragma once

// Adam with bias correction:
//   m <- b1 m + (1 - b1) g
//   v <- b2 v + (1 - b2) g^2
//   p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ivgan/error.hpp"
#include "ivgan/nets/network.hpp"

namespace ivgan::train {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const
    {
        if (!(lr > 0.0) || !std::isfinite(lr)) {
            throw ConfigError("learning rate must be positive");
        }
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            throw ConfigError("Adam betas must lie in [0,1)");
        }
        if (!(eps > 0.0)) {
            throw ConfigError("Adam eps must be positive");
        }
    }

    friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

template <class T>
class Adam {
public:
    Adam(std::vector<nets::NamedTensor<T>> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg)
    {
        cfg_.validate();
        for (const auto& p : params_) {
            m_.emplace_back(p.tensor.numel(), 0.0);
            v_.emplace_back(p.tensor.numel(), 0.0);
        }
    }

    /// Applies one update from the gradients currently stored on the
    /// parameters. Moments are kept in double regardless of T.
    void step()
    {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            Tensor<T> p = params_[k].tensor;
            const auto g = p.grad();
            auto values = p.mutable_data();
            auto& m = m_[k];
            auto& v = v_[k];
            for (std::size_t i = 0; i < values.size(); ++i) {
                const double gi = static_cast<double>(g[i]);
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
                const double update = cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
                values[i] = static_cast<T>(static_cast<double>(values[i]) - update);
            }
        }
    }

    void zero_grad()
    {
        for (auto& p : params_) {
            p.tensor.zero_grad();
        }
    }

    std::uint64_t steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    std::vector<nets::NamedTensor<T>> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    std::uint64_t t_ = 0;
};

}  // namespace ivgan::train
