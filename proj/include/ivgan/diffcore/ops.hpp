#pragma once

// Differentiable primitives over Tensor<T>. Every function builds a new graph
// node; none mutate their inputs.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ivgan/diffcore/rng.hpp"
#include "ivgan/diffcore/tensor.hpp"

namespace ivgan::ops {

/// Floor applied before log(); keeps the adversarial loss finite when the
/// discriminator saturates.
inline constexpr double kLogClamp = 1e-12;

namespace detail {

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op)
{
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " are incompatible");
    }
}

/// Elementwise unary op with derivative expressed through input x and output y.
template <class T, class Fwd, class Deriv>
Tensor<T> unary(const char* name, const Tensor<T>& x, Fwd fwd, Deriv deriv)
{
    const auto& in = x.values();
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = fwd(in[i]);
    }
    auto xn = x.node_ptr();
    return ivgan::detail::make_result<T>(name, x.shape(), std::move(out), {&x},
                                         [xn, deriv](ivgan::detail::Node<T>& self) {
                                             auto* gx = ivgan::detail::grad_of(xn);
                                             if (!gx) {
                                                 return;
                                             }
                                             for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                                 (*gx)[i] += self.grad[i] * deriv(xn->value[i], self.value[i]);
                                             }
                                         });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Arithmetic

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b)
{
    detail::require_same_shape(a, b, "add");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.values()[i] + b.values()[i];
    }
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return ivgan::detail::make_result<T>("add", a.shape(), std::move(out), {&a, &b},
                                         [an, bn](ivgan::detail::Node<T>& self) {
                                             for (auto* g : {ivgan::detail::grad_of(an), ivgan::detail::grad_of(bn)}) {
                                                 if (g) {
                                                     for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                                         (*g)[i] += self.grad[i];
                                                     }
                                                 }
                                             }
                                         });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b)
{
    detail::require_same_shape(a, b, "sub");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.values()[i] - b.values()[i];
    }
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return ivgan::detail::make_result<T>("sub", a.shape(), std::move(out), {&a, &b},
                                         [an, bn](ivgan::detail::Node<T>& self) {
                                             if (auto* ga = ivgan::detail::grad_of(an)) {
                                                 for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                                     (*ga)[i] += self.grad[i];
                                                 }
                                             }
                                             if (auto* gb = ivgan::detail::grad_of(bn)) {
                                                 for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                                     (*gb)[i] -= self.grad[i];
                                                 }
                                             }
                                         });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b)
{
    detail::require_same_shape(a, b, "mul");
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a.values()[i] * b.values()[i];
    }
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return ivgan::detail::make_result<T>("mul", a.shape(), std::move(out), {&a, &b},
                                         [an, bn](ivgan::detail::Node<T>& self) {
                                             if (auto* ga = ivgan::detail::grad_of(an)) {
                                                 for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                                     (*ga)[i] += self.grad[i] * bn->value[i];
                                                 }
                                             }
                                             if (auto* gb = ivgan::detail::grad_of(bn)) {
                                                 for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                                     (*gb)[i] += self.grad[i] * an->value[i];
                                                 }
                                             }
                                         });
}

/// x * factor
template <class T>
Tensor<T> scale(const Tensor<T>& x, T factor)
{
    return detail::unary<T>(
        "scale", x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

/// offset - x
template <class T>
Tensor<T> rsub(T offset, const Tensor<T>& x)
{
    return detail::unary<T>(
        "rsub", x, [offset](T v) { return offset - v; }, [](T, T) { return T{-1}; });
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities

template <class T>
Tensor<T> abs_(const Tensor<T>& x)
{
    // Subgradient 0 at the kink.
    return detail::unary<T>(
        "abs", x, [](T v) { return std::abs(v); },
        [](T v, T) { return v > T{0} ? T{1} : (v < T{0} ? T{-1} : T{0}); });
}

template <class T>
Tensor<T> square_(const Tensor<T>& x)
{
    return detail::unary<T>(
        "square", x, [](T v) { return v * v; }, [](T v, T) { return T{2} * v; });
}

/// Natural log of max(x, 1e-12). Gradient is zero on the clamped part.
template <class T>
Tensor<T> log_(const Tensor<T>& x)
{
    const T floor = static_cast<T>(kLogClamp);
    return detail::unary<T>(
        "log", x, [floor](T v) { return std::log(v > floor ? v : floor); },
        [floor](T v, T) { return v > floor ? T{1} / v : T{0}; });
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T negative_slope = T(0.2))
{
    return detail::unary<T>(
        "leaky_relu", x, [negative_slope](T v) { return v > T{0} ? v : negative_slope * v; },
        [negative_slope](T v, T) { return v > T{0} ? T{1} : negative_slope; });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x)
{
    return detail::unary<T>(
        "relu", x, [](T v) { return v > T{0} ? v : T{0}; }, [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <class T>
Tensor<T> tanh_act(const Tensor<T>& x)
{
    return detail::unary<T>(
        "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T{1} - y * y; });
}

template <class T>
Tensor<T> sigmoid_act(const Tensor<T>& x)
{
    return detail::unary<T>(
        "sigmoid", x,
        [](T v) {
            if (v >= T{0}) {
                return T{1} / (T{1} + std::exp(-v));
            }
            const T e = std::exp(v);
            return e / (T{1} + e);
        },
        [](T, T y) { return y * (T{1} - y); });
}

/// Inverted dropout: surviving activations are scaled by 1/(1-p). With
/// `active == false` (or p == 0) the input passes through unchanged and the rng
/// is not consumed.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng, bool active)
{
    if (!(p >= 0.0 && p < 1.0)) {
        throw ConfigError("dropout probability must lie in [0,1), got " + std::to_string(p));
    }
    if (!active || p == 0.0) {
        return x;
    }
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    std::vector<T> mask(x.numel());
    for (auto& m : mask) {
        m = rng.uniform() < p ? T{0} : keep_scale;
    }
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x.values()[i] * mask[i];
    }
    auto xn = x.node_ptr();
    return ivgan::detail::make_result<T>("dropout", x.shape(), std::move(out), {&x},
                                         [xn, mask = std::move(mask)](ivgan::detail::Node<T>& self) {
                                             if (auto* gx = ivgan::detail::grad_of(xn)) {
                                                 for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                                     (*gx)[i] += self.grad[i] * mask[i];
                                                 }
                                             }
                                         });
}

// ---------------------------------------------------------------------------
// Reductions and structure

template <class T>
Tensor<T> sum(const Tensor<T>& x)
{
    T total{0};
    for (T v : x.values()) {
        total += v;
    }
    auto xn = x.node_ptr();
    return ivgan::detail::make_result<T>("sum", Shape{1}, {total}, {&x}, [xn](ivgan::detail::Node<T>& self) {
        if (auto* gx = ivgan::detail::grad_of(xn)) {
            for (auto& g : *gx) {
                g += self.grad[0];
            }
        }
    });
}

/// Arithmetic mean over every element, as a shape-[1] tensor.
template <class T>
Tensor<T> mean(const Tensor<T>& x)
{
    T total{0};
    for (T v : x.values()) {
        total += v;
    }
    const T inv_n = T{1} / static_cast<T>(x.numel());
    auto xn = x.node_ptr();
    return ivgan::detail::make_result<T>("mean", Shape{1}, {total * inv_n}, {&x},
                                         [xn, inv_n](ivgan::detail::Node<T>& self) {
                                             if (auto* gx = ivgan::detail::grad_of(xn)) {
                                                 const T g = self.grad[0] * inv_n;
                                                 for (auto& v : *gx) {
                                                     v += g;
                                                 }
                                             }
                                         });
}

/// Concatenate along `axis`; all other extents must agree.
template <class T>
Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b, std::size_t axis)
{
    if (axis >= a.rank() || a.rank() != b.rank()) {
        throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for shapes " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
    }
    for (std::size_t d = 0; d < a.rank(); ++d) {
        if (d != axis && a.dim(d) != b.dim(d)) {
            throw ShapeError("concat: dimension " + std::to_string(d) + " differs (" +
                             std::to_string(a.dim(d)) + " vs " + std::to_string(b.dim(d)) + ")");
        }
    }
    std::size_t outer = 1;
    for (std::size_t d = 0; d < axis; ++d) {
        outer *= a.dim(d);
    }
    const std::size_t inner_a = a.numel() / outer;
    const std::size_t inner_b = b.numel() / outer;
    Shape shape = a.shape();
    shape[axis] += b.dim(axis);

    std::vector<T> out;
    out.reserve(a.numel() + b.numel());
    for (std::size_t o = 0; o < outer; ++o) {
        out.insert(out.end(), a.values().begin() + o * inner_a, a.values().begin() + (o + 1) * inner_a);
        out.insert(out.end(), b.values().begin() + o * inner_b, b.values().begin() + (o + 1) * inner_b);
    }
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return ivgan::detail::make_result<T>(
        "concat", std::move(shape), std::move(out), {&a, &b},
        [an, bn, outer, inner_a, inner_b](ivgan::detail::Node<T>& self) {
            auto* ga = ivgan::detail::grad_of(an);
            auto* gb = ivgan::detail::grad_of(bn);
            const std::size_t stride = inner_a + inner_b;
            for (std::size_t o = 0; o < outer; ++o) {
                const T* src = self.grad.data() + o * stride;
                if (ga) {
                    for (std::size_t i = 0; i < inner_a; ++i) {
                        (*ga)[o * inner_a + i] += src[i];
                    }
                }
                if (gb) {
                    for (std::size_t i = 0; i < inner_b; ++i) {
                        (*gb)[o * inner_b + i] += src[inner_a + i];
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Batch normalization

enum class NormMode {
    train,  // batch statistics, running statistics updated
    eval,   // running statistics
    batch,  // batch statistics, running statistics untouched
};

/// Per-channel batch normalization of an [N,C,...] tensor.
///
/// Running variance uses the biased (population) estimate so that a model
/// whose running statistics equal the batch statistics behaves identically in
/// both modes. Running update: r <- (1 - momentum) r + momentum * batch.
template <class T>
Tensor<T> batch_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta_shift, NormMode mode,
                     std::span<T> running_mean, std::span<T> running_var, double momentum = 0.1,
                     double eps = 1e-5)
{
    if (x.rank() < 2) {
        throw ShapeError("batch_norm expects [N,C,...], got " + shape_str(x.shape()));
    }
    const std::size_t n = x.dim(0);
    const std::size_t channels = x.dim(1);
    const std::size_t spatial = x.numel() / (n * channels);
    const std::size_t count = n * spatial;
    if (gamma.numel() != channels || beta_shift.numel() != channels || running_mean.size() != channels ||
        running_var.size() != channels) {
        throw ShapeError("batch_norm: per-channel parameters must have " + std::to_string(channels) +
                         " elements");
    }
    const bool use_batch = mode != NormMode::eval;
    if (use_batch && count < 2) {
        throw ShapeError("batch_norm: channel statistics need at least 2 elements per channel in batch mode, got " +
                         std::to_string(count) + " for input " + shape_str(x.shape()));
    }

    const auto& xv = x.values();
    std::vector<T> mu(channels), inv_std(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        if (use_batch) {
            double s = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                const T* p = xv.data() + (b * channels + c) * spatial;
                for (std::size_t i = 0; i < spatial; ++i) {
                    s += p[i];
                }
            }
            const double m = s / static_cast<double>(count);
            double ss = 0.0;
            for (std::size_t b = 0; b < n; ++b) {
                const T* p = xv.data() + (b * channels + c) * spatial;
                for (std::size_t i = 0; i < spatial; ++i) {
                    const double d = p[i] - m;
                    ss += d * d;
                }
            }
            const double var = ss / static_cast<double>(count);
            mu[c] = static_cast<T>(m);
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + eps));
            if (mode == NormMode::train) {
                running_mean[c] = static_cast<T>((1.0 - momentum) * running_mean[c] + momentum * m);
                running_var[c] = static_cast<T>((1.0 - momentum) * running_var[c] + momentum * var);
            }
        } else {
            mu[c] = running_mean[c];
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps));
        }
    }

    std::vector<T> xhat(x.numel());
    std::vector<T> out(x.numel());
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t base = (b * channels + c) * spatial;
            const T g = gamma.values()[c];
            const T sh = beta_shift.values()[c];
            for (std::size_t i = 0; i < spatial; ++i) {
                const T h = (xv[base + i] - mu[c]) * inv_std[c];
                xhat[base + i] = h;
                out[base + i] = g * h + sh;
            }
        }
    }

    auto xn = x.node_ptr();
    auto gn = gamma.node_ptr();
    auto bn = beta_shift.node_ptr();
    return ivgan::detail::make_result<T>(
        "batch_norm", x.shape(), std::move(out), {&x, &gamma, &beta_shift},
        [xn, gn, bn, xhat = std::move(xhat), inv_std = std::move(inv_std), n, channels, spatial, count,
         use_batch](ivgan::detail::Node<T>& self) {
            auto* gx = ivgan::detail::grad_of(xn);
            auto* gg = ivgan::detail::grad_of(gn);
            auto* gb = ivgan::detail::grad_of(bn);
            const auto& dy = self.grad;
            for (std::size_t c = 0; c < channels; ++c) {
                double sum_dy = 0.0;
                double sum_dy_xhat = 0.0;
                for (std::size_t b = 0; b < n; ++b) {
                    const std::size_t base = (b * channels + c) * spatial;
                    for (std::size_t i = 0; i < spatial; ++i) {
                        sum_dy += dy[base + i];
                        sum_dy_xhat += dy[base + i] * xhat[base + i];
                    }
                }
                if (gg) {
                    (*gg)[c] += static_cast<T>(sum_dy_xhat);
                }
                if (gb) {
                    (*gb)[c] += static_cast<T>(sum_dy);
                }
                if (!gx) {
                    continue;
                }
                const T g = gn->value[c];
                const T k = g * inv_std[c];
                if (use_batch) {
                    const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(count));
                    const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / static_cast<double>(count));
                    for (std::size_t b = 0; b < n; ++b) {
                        const std::size_t base = (b * channels + c) * spatial;
                        for (std::size_t i = 0; i < spatial; ++i) {
                            (*gx)[base + i] += k * (dy[base + i] - mean_dy - xhat[base + i] * mean_dy_xhat);
                        }
                    }
                } else {
                    for (std::size_t b = 0; b < n; ++b) {
                        const std::size_t base = (b * channels + c) * spatial;
                        for (std::size_t i = 0; i < spatial; ++i) {
                            (*gx)[base + i] += k * dy[base + i];
                        }
                    }
                }
            }
        });
}

}  // namespace ivgan::ops
