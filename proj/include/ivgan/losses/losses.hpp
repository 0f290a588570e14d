#pragma once

// Adversarial and reconstruction objectives.
//
//   d_loss   = -mean log S(u,v) - mean log(1 - S(u,F(u,c)))
//   g_adv    = -mean log S(u,F(u,c))              (non-saturating form)
//   g_total  = a * g_adv + b * rec(v, F(u,c))
//
// Expectations are means over batch and discriminator grid cells. log is
// clamped at ops::kLogClamp, so every loss is finite.

#include <cmath>
#include <string>
#include <vector>

#include "ivgan/diffcore/ops.hpp"
#include "ivgan/error.hpp"

namespace ivgan::losses {

enum class RecMode { l1, l2, l1_plus_l2 };

inline const char* to_string(RecMode m)
{
    switch (m) {
    case RecMode::l1:
        return "l1";
    case RecMode::l2:
        return "l2";
    case RecMode::l1_plus_l2:
        return "l1_plus_l2";
    }
    return "?";
}

inline RecMode parse_rec_mode(const std::string& s)
{
    if (s == "l1" || s == "L1") {
        return RecMode::l1;
    }
    if (s == "l2" || s == "L2") {
        return RecMode::l2;
    }
    if (s == "l1_plus_l2" || s == "L1plusL2") {
        return RecMode::l1_plus_l2;
    }
    throw ConfigError("unknown rec_mode '" + s + "' (expected l1, l2 or l1_plus_l2)");
}

struct LossWeights {
    double a = 1.0;    // adversarial weight
    double b = 100.0;  // reconstruction weight (the beta of the sweeps)
    RecMode rec_mode = RecMode::l1;
    double l1_share = 0.5;  // used by l1_plus_l2 only

    /// Balance ratio b / a (infinite for reconstruction-only training).
    double eta() const { return a == 0.0 ? INFINITY : b / a; }

    void validate() const
    {
        if (!(a >= 0.0) || !std::isfinite(a)) {
            throw ConfigError("loss weight a must be finite and >= 0");
        }
        if (!(b >= 0.0) || !std::isfinite(b)) {
            throw ConfigError("loss weight b must be finite and >= 0");
        }
        if (a == 0.0 && b == 0.0) {
            throw ConfigError("loss weights a and b are both zero");
        }
        if (!(l1_share >= 0.0 && l1_share <= 1.0)) {
            throw ConfigError("l1_share must lie in [0,1]");
        }
    }

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

namespace detail {

template <class T>
void require_nonempty(const Tensor<T>& t, const char* op)
{
    if (!t.defined() || t.numel() == 0) {
        throw ShapeError(std::string(op) + ": empty probability grid");
    }
}

}  // namespace detail

template <class T>
Tensor<T> d_loss(const Tensor<T>& s_real, const Tensor<T>& s_fake)
{
    detail::require_nonempty(s_real, "d_loss");
    detail::require_nonempty(s_fake, "d_loss");
    const Tensor<T> real_term = ops::mean(ops::log_(s_real));
    const Tensor<T> fake_term = ops::mean(ops::log_(ops::rsub(T{1}, s_fake)));
    return ops::scale(ops::add(real_term, fake_term), T{-1});
}

template <class T>
Tensor<T> g_adv_loss(const Tensor<T>& s_fake)
{
    detail::require_nonempty(s_fake, "g_adv_loss");
    return ops::scale(ops::mean(ops::log_(s_fake)), T{-1});
}

template <class T>
Tensor<T> l1_loss(const Tensor<T>& v, const Tensor<T>& v_hat)
{
    return ops::mean(ops::abs_(ops::sub(v_hat, v)));
}

template <class T>
Tensor<T> l2_loss(const Tensor<T>& v, const Tensor<T>& v_hat)
{
    return ops::mean(ops::square_(ops::sub(v_hat, v)));
}

template <class T>
Tensor<T> reconstruction_loss(const Tensor<T>& v, const Tensor<T>& v_hat, const LossWeights& w)
{
    switch (w.rec_mode) {
    case RecMode::l1:
        return l1_loss(v, v_hat);
    case RecMode::l2:
        return l2_loss(v, v_hat);
    case RecMode::l1_plus_l2:
        return ops::add(ops::scale(l1_loss(v, v_hat), static_cast<T>(w.l1_share)),
                        ops::scale(l2_loss(v, v_hat), static_cast<T>(1.0 - w.l1_share)));
    }
    throw ConfigError("invalid rec_mode");
}

template <class T>
struct GeneratorLoss {
    Tensor<T> total;
    double adversarial = 0.0;     // a * g_adv
    double reconstruction = 0.0;  // b * rec (summed over supervised outputs)
};

/// a * g_adv(S_fake) + b * rec(v, v_hat). When `intermediates` is non-empty
/// (stacked generators), it lists every supervised output including the
/// final one, and each contributes rec at weight b / intermediates.size().
/// Terms with a zero weight are skipped, so S_fake may be undefined when a == 0.
template <class T>
GeneratorLoss<T> combined_g_loss(const Tensor<T>& s_fake, const Tensor<T>& v, const Tensor<T>& v_hat,
                                 const std::vector<Tensor<T>>& intermediates, const LossWeights& w)
{
    w.validate();
    GeneratorLoss<T> out;
    Tensor<T> total;
    const auto accumulate = [&](const Tensor<T>& term) { total = total.defined() ? ops::add(total, term) : term; };
    if (w.a > 0.0) {
        const Tensor<T> adv = ops::scale(g_adv_loss(s_fake), static_cast<T>(w.a));
        out.adversarial = static_cast<double>(adv.item());
        accumulate(adv);
    }
    if (w.b > 0.0) {
        Tensor<T> rec;
        if (intermediates.empty()) {
            rec = ops::scale(reconstruction_loss(v, v_hat, w), static_cast<T>(w.b));
        } else {
            const T share = static_cast<T>(w.b / static_cast<double>(intermediates.size()));
            for (const auto& p : intermediates) {
                const Tensor<T> term = ops::scale(reconstruction_loss(v, p, w), share);
                rec = rec.defined() ? ops::add(rec, term) : term;
            }
        }
        out.reconstruction = static_cast<double>(rec.item());
        accumulate(rec);
    }
    out.total = total;
    return out;
}

}  // namespace ivgan::losses
