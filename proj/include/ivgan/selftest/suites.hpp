#pragma once

// Oracle suites run by `ivgan selftest` and by the acceptance binary.
// Each check compares library output against an independent computation:
// central finite differences, inner-product adjoints, set enumeration,
// brute-force nearest neighbours, analytic areas, closed-form parameter
// counts, or a hand-expanded optimizer update.

#include <chrono>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ivgan/diffcore/conv.hpp"
#include "ivgan/diffcore/ops.hpp"
#include "ivgan/diffcore/rng.hpp"
#include "ivgan/diffcore/tensor.hpp"
#include "ivgan/geometry.hpp"
#include "ivgan/metrics/metrics.hpp"
#include "ivgan/nets/generator.hpp"
#include "ivgan/phantom/phantom.hpp"
#include "ivgan/segment/segment.hpp"
#include "ivgan/train/adam.hpp"

namespace ivgan::selftest {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

using TensorD = Tensor<double>;

// ---------------------------------------------------------------------------
// Shared helpers

inline TensorD random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0, bool requires_grad = false)
{
    TensorD t(std::move(shape), 0.0, requires_grad);
    for (auto& v : t.mutable_data()) {
        v = rng.uniform(lo, hi);
    }
    return t;
}

/// Values with magnitude in [0.2, 1] and random sign, away from kinks at 0.
inline TensorD away_from_zero(Rng& rng, Shape shape)
{
    TensorD t(std::move(shape), 0.0, true);
    for (auto& v : t.mutable_data()) {
        v = rng.uniform(0.2, 1.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    }
    return t;
}

inline Shape random_shape(Rng& rng, std::size_t min_rank = 1, std::size_t max_rank = 4)
{
    const std::size_t rank = min_rank + static_cast<std::size_t>(rng.uniform_int(max_rank - min_rank + 1));
    Shape s(rank);
    for (auto& e : s) {
        e = 1 + static_cast<std::size_t>(rng.uniform_int(4));
    }
    return s;
}

/// Largest per-tensor relative error ||analytic - numeric|| / max(||a||, ||n||)
/// between reverse-mode gradients and central differences of the scalar
/// `loss(inputs)`. Every input must require gradients.
inline double gradient_error(const std::function<TensorD(const std::vector<TensorD>&)>& loss,
                             std::vector<TensorD> inputs, double h = 1e-6)
{
    for (auto& t : inputs) {
        t.zero_grad();
    }
    backward(loss(inputs));
    double worst = 0.0;
    for (auto& t : inputs) {
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        std::vector<double> numeric(t.numel());
        auto values = t.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double up = loss(inputs).item();
            values[i] = saved - h;
            const double down = loss(inputs).item();
            values[i] = saved;
            numeric[i] = (up - down) / (2.0 * h);
        }
        double diff = 0.0, na = 0.0, nn = 0.0;
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
            na += analytic[i] * analytic[i];
            nn += numeric[i] * numeric[i];
        }
        const double scale = std::max(std::sqrt(std::max(na, nn)), 1e-12);
        worst = std::max(worst, std::sqrt(diff) / scale);
    }
    return worst;
}

/// Projects an op output to a scalar with fixed random weights so that every
/// output element contributes with a distinct coefficient.
inline TensorD project(const TensorD& y, std::uint64_t salt)
{
    Rng r = Rng(0x5eed).fork(salt);
    TensorD w(y.shape());
    for (auto& v : w.mutable_data()) {
        v = r.uniform(-1.0, 1.0);
    }
    return ops::sum(ops::mul(y, w));
}

template <class F>
CheckResult timed(const std::string& name, F&& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    r.name = name;
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

inline std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

inline constexpr double kGradTolerance = 1e-5;
inline constexpr int kShapesPerOp = 10;

struct OpCase {
    std::string name;
    std::function<std::pair<std::function<TensorD(const std::vector<TensorD>&)>, std::vector<TensorD>>(Rng&)> make;
};

inline std::vector<OpCase> op_cases()
{
    using Loss = std::function<TensorD(const std::vector<TensorD>&)>;
    std::vector<OpCase> cases;
    const auto unary = [&](std::string name, std::function<TensorD(const TensorD&)> op, bool kink, double lo = -1.0,
                           double hi = 1.0) {
        cases.push_back({name, [=](Rng& rng) {
                             const Shape s = random_shape(rng);
                             TensorD x = kink ? away_from_zero(rng, s) : random_tensor(rng, s, lo, hi, true);
                             Loss f = [=](const std::vector<TensorD>& in) { return project(op(in[0]), 1); };
                             return std::pair{f, std::vector<TensorD>{x}};
                         }});
    };
    const auto binary = [&](std::string name, std::function<TensorD(const TensorD&, const TensorD&)> op) {
        cases.push_back({name, [=](Rng& rng) {
                             const Shape s = random_shape(rng);
                             Loss f = [=](const std::vector<TensorD>& in) { return project(op(in[0], in[1]), 2); };
                             return std::pair{f, std::vector<TensorD>{random_tensor(rng, s, -1, 1, true),
                                                                      random_tensor(rng, s, -1, 1, true)}};
                         }});
    };
    binary("add", [](const TensorD& a, const TensorD& b) { return ops::add(a, b); });
    binary("sub", [](const TensorD& a, const TensorD& b) { return ops::sub(a, b); });
    binary("mul", [](const TensorD& a, const TensorD& b) { return ops::mul(a, b); });
    unary("scale", [](const TensorD& x) { return ops::scale(x, -1.7); }, false);
    unary("rsub", [](const TensorD& x) { return ops::rsub(0.3, x); }, false);
    unary("abs", [](const TensorD& x) { return ops::abs_(x); }, true);
    unary("square", [](const TensorD& x) { return ops::square_(x); }, false);
    unary("log", [](const TensorD& x) { return ops::log_(x); }, false, 0.5, 2.0);
    unary("leaky_relu", [](const TensorD& x) { return ops::leaky_relu(x, 0.2); }, true);
    unary("relu", [](const TensorD& x) { return ops::relu(x); }, true);
    unary("tanh", [](const TensorD& x) { return ops::tanh_act(x); }, false, -2.0, 2.0);
    unary("sigmoid", [](const TensorD& x) { return ops::sigmoid_act(x); }, false, -3.0, 3.0);
    unary("sum", [](const TensorD& x) { return ops::scale(ops::sum(x), 0.7); }, false);
    unary("mean", [](const TensorD& x) { return ops::scale(ops::mean(x), 0.7); }, false);
    cases.push_back({"dropout", [](Rng& rng) {
                         const Shape s = random_shape(rng);
                         const Rng mask_rng = rng.fork("dropout.mask");
                         Loss f = [=](const std::vector<TensorD>& in) {
                             Rng r = mask_rng;  // identical mask on every evaluation
                             return project(ops::dropout(in[0], 0.3, r, true), 3);
                         };
                         return std::pair{f, std::vector<TensorD>{random_tensor(rng, s, -1, 1, true)}};
                     }});
    cases.push_back({"concat", [](Rng& rng) {
                         Shape a = random_shape(rng);
                         const std::size_t axis = static_cast<std::size_t>(rng.uniform_int(a.size()));
                         Shape b = a;
                         b[axis] = 1 + static_cast<std::size_t>(rng.uniform_int(3));
                         Loss f = [=](const std::vector<TensorD>& in) {
                             return project(ops::concat(in[0], in[1], axis), 4);
                         };
                         return std::pair{f, std::vector<TensorD>{random_tensor(rng, a, -1, 1, true),
                                                                  random_tensor(rng, b, -1, 1, true)}};
                     }});
    for (const bool train_mode : {true, false}) {
        cases.push_back({train_mode ? "batch_norm_train" : "batch_norm_eval", [train_mode](Rng& rng) {
                             Shape s = random_shape(rng, 2, 4);
                             if (train_mode && shape_numel(s) / s[1] < 2) {
                                 s[0] += 1;
                             }
                             const std::size_t c = s[1];
                             std::vector<double> rm(c), rv(c);
                             for (std::size_t i = 0; i < c; ++i) {
                                 rm[i] = rng.uniform(-0.5, 0.5);
                                 rv[i] = rng.uniform(0.5, 2.0);
                             }
                             Loss f = [=](const std::vector<TensorD>& in) {
                                 std::vector<double> m = rm, v = rv;
                                 return project(ops::batch_norm(in[0], in[1], in[2],
                                                                train_mode ? ops::NormMode::train : ops::NormMode::eval,
                                                                std::span<double>(m), std::span<double>(v)),
                                                5);
                             };
                             return std::pair{f, std::vector<TensorD>{random_tensor(rng, s, -1, 1, true),
                                                                      random_tensor(rng, Shape{c}, 0.5, 1.5, true),
                                                                      random_tensor(rng, Shape{c}, -0.5, 0.5, true)}};
                         }});
    }
    for (const bool transpose : {false, true}) {
        for (const bool with_bias : {false, true}) {
            std::string name = transpose ? "conv2d_transpose" : "conv2d";
            name += with_bias ? "+bias" : "";
            cases.push_back({name, [transpose, with_bias](Rng& rng) {
                                 const std::size_t n = 1 + rng.uniform_int(2), c = 1 + rng.uniform_int(3),
                                                   o = 1 + rng.uniform_int(3), k = 1 + rng.uniform_int(3);
                                 const ops::ConvGeometry g{1 + rng.uniform_int(2), rng.uniform_int(std::min<std::size_t>(k, 2))};
                                 const std::size_t min_hw = transpose ? 2 : k;
                                 const std::size_t h = min_hw + rng.uniform_int(3), w = min_hw + rng.uniform_int(3);
                                 const Shape ws = transpose ? Shape{c, o, k, k} : Shape{o, c, k, k};
                                 std::vector<TensorD> in{random_tensor(rng, Shape{n, c, h, w}, -1, 1, true),
                                                         random_tensor(rng, ws, -1, 1, true)};
                                 if (with_bias) {
                                     in.push_back(random_tensor(rng, Shape{o}, -1, 1, true));
                                 }
                                 Loss f = [=](const std::vector<TensorD>& x) {
                                     const TensorD bias = x.size() > 2 ? x[2] : TensorD();
                                     return project(transpose ? ops::conv2d_transpose(x[0], x[1], bias, g)
                                                              : ops::conv2d(x[0], x[1], bias, g),
                                                    6);
                                 };
                                 return std::pair{f, in};
                             }});
        }
    }
    return cases;
}

/// Whole-generator check: loss over every supervised output, gradients for
/// the input image and every parameter.
inline double generator_gradient_error(nets::GeneratorVariant variant, std::uint64_t seed)
{
    nets::GeneratorConfig cfg;
    cfg.variant = variant;
    cfg.image_size = 8;
    cfg.depth = 2;
    cfg.base_channels = 2;
    const nets::Generator<double> gen(cfg, Rng(seed));
    Rng rng(seed + 1);
    std::vector<TensorD> inputs{random_tensor(rng, Shape{2, 1, 8, 8}, -1, 1, true)};
    for (const auto& p : gen.parameters()) {
        inputs.push_back(p.tensor);
    }
    const Rng noise = Rng(seed).fork("gradcheck.noise");
    auto loss = [&](const std::vector<TensorD>& in) {
        Rng r = noise;
        const auto out = gen.forward(in[0], r, nets::Phase::train);
        TensorD total = project(out.prediction, 7);
        for (std::size_t s = 0; s < out.intermediates.size(); ++s) {
            total = ops::add(total, project(out.intermediates[s], 8 + s));
        }
        return total;
    };
    return gradient_error(loss, inputs);
}

inline std::vector<CheckResult> suite_gradients()
{
    std::vector<CheckResult> out;
    out.push_back(timed("gradients/ops", [](CheckResult& r) {
        Rng rng(101);
        double worst = 0.0;
        std::string worst_op;
        int checked = 0;
        for (const auto& c : op_cases()) {
            for (int k = 0; k < kShapesPerOp; ++k) {
                Rng case_rng = rng.fork(c.name).fork(static_cast<std::uint64_t>(k));
                auto [loss, inputs] = c.make(case_rng);
                const double e = gradient_error(loss, inputs);
                ++checked;
                if (!(e <= worst)) {
                    worst = e;
                    worst_op = c.name;
                }
            }
        }
        r.passed = worst < kGradTolerance;
        r.detail = std::to_string(checked) + " op/shape cases, max rel err " + fmt(worst) + " (" + worst_op +
                   "), tol " + fmt(kGradTolerance);
    }));
    for (auto v : {nets::GeneratorVariant::unet, nets::GeneratorVariant::encoder_decoder,
                   nets::GeneratorVariant::hourglass_no_reinject, nets::GeneratorVariant::hourglass_reinject}) {
        out.push_back(timed(std::string("gradients/generator_") + nets::to_string(v), [v](CheckResult& r) {
            const double e = generator_gradient_error(v, 11);
            r.passed = e < kGradTolerance;
            r.detail = "depth 2, base 2, 8x8, max rel err " + fmt(e);
        }));
    }
    return out;
}

// ---------------------------------------------------------------------------
// 2. Adjoint identity

inline double inner(const TensorD& a, const TensorD& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        s += a.data()[i] * b.data()[i];
    }
    return s;
}

inline std::vector<CheckResult> suite_adjoint()
{
    return {timed("adjoint/conv2d_vs_transpose", [](CheckResult& r) {
        Rng rng(202);
        double worst = 0.0;
        constexpr int kShapes = 20;
        for (int i = 0; i < kShapes; ++i) {
            const std::size_t n = 1 + rng.uniform_int(2), c = 1 + rng.uniform_int(4), o = 1 + rng.uniform_int(4),
                              k = 1 + rng.uniform_int(4);
            const ops::ConvGeometry g{1 + rng.uniform_int(3), rng.uniform_int(std::min<std::size_t>(k, 3))};
            // Pick spatial sizes that the stride tiles exactly so both ops
            // map between the same pair of shapes.
            const std::size_t ho = 1 + rng.uniform_int(5), wo = 1 + rng.uniform_int(5);
            const std::size_t h = (ho - 1) * g.stride + k - 2 * g.padding;
            const std::size_t w = (wo - 1) * g.stride + k - 2 * g.padding;
            if (h < 1 || w < 1 || h > 64 || w > 64) {
                --i;
                continue;
            }
            const TensorD x = random_tensor(rng, Shape{n, c, h, w});
            const TensorD wt = random_tensor(rng, Shape{o, c, k, k});
            const TensorD y = random_tensor(rng, Shape{n, o, ho, wo});
            const TensorD ax = ops::conv2d(x, wt, TensorD(), g);
            const TensorD aty = ops::conv2d_transpose(y, wt, TensorD(), g);
            if (ax.shape() != y.shape() || aty.shape() != x.shape()) {
                throw ShapeError("adjoint: shape mismatch " + shape_str(ax.shape()) + " vs " + shape_str(y.shape()));
            }
            const double lhs = inner(ax, y), rhs = inner(x, aty);
            worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
        }
        r.passed = worst <= 1e-10;
        r.detail = std::to_string(kShapes) + " random geometries, max |<Ax,y>-<x,A'y>| " + fmt(worst) + ", tol 1e-10";
    })};
}

// ---------------------------------------------------------------------------
// 3. Metric oracles

inline BinaryMask random_mask(Rng& rng, std::size_t w, std::size_t h)
{
    BinaryMask m(w, h);
    const double density = rng.uniform(0.05, 0.95);
    for (auto& v : m.values) {
        v = rng.bernoulli(density) ? 1 : 0;
    }
    return m;
}

inline std::set<std::pair<std::size_t, std::size_t>> pixel_set(const BinaryMask& m)
{
    std::set<std::pair<std::size_t, std::size_t>> s;
    for (std::size_t y = 0; y < m.height; ++y) {
        for (std::size_t x = 0; x < m.width; ++x) {
            if (m(x, y)) {
                s.emplace(x, y);
            }
        }
    }
    return s;
}

/// Random star-shaped polygon.
inline Contour random_star(Rng& rng, double max_radius)
{
    Contour c;
    const std::size_t n = 6 + rng.uniform_int(15);
    const Point center{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = 2.0 * M_PI * (static_cast<double>(i) + rng.uniform(0.0, 0.8)) / static_cast<double>(n);
        const double radius = rng.uniform(0.3, 1.0) * max_radius;
        c.vertices.push_back({center.x + radius * std::cos(theta), center.y + radius * std::sin(theta)});
    }
    return c;
}

struct BruteDistances {
    double hd = 0.0;
    double ad = 0.0;
};

/// O(n^2) nearest neighbours over two point sets.
inline BruteDistances brute_force_distances(const std::vector<Point>& a, const std::vector<Point>& b)
{
    const auto directed = [](const std::vector<Point>& from, const std::vector<Point>& to, double& worst) {
        double sum = 0.0;
        for (const Point& p : from) {
            double best = INFINITY;
            for (const Point& q : to) {
                const double dx = p.x - q.x, dy = p.y - q.y;
                best = std::min(best, dx * dx + dy * dy);
            }
            worst = std::max(worst, best);
            sum += std::sqrt(best);
        }
        return sum / static_cast<double>(from.size());
    };
    double worst = 0.0;
    const double ab = directed(a, b, worst);
    const double ba = directed(b, a, worst);
    return {std::sqrt(worst), 0.5 * (ab + ba)};
}

inline std::vector<CheckResult> suite_metric_oracles()
{
    std::vector<CheckResult> out;
    out.push_back(timed("metrics/jaccard_pad_vs_sets", [](CheckResult& r) {
        Rng rng(303);
        constexpr int kPairs = 1000;
        int mismatches = 0;
        for (int i = 0; i < kPairs; ++i) {
            const BinaryMask a = random_mask(rng, 16, 16);
            BinaryMask b = random_mask(rng, 16, 16);
            if (b.count() == 0) {
                b.values[0] = 1;
            }
            const auto sa = pixel_set(a), sb = pixel_set(b);
            std::size_t inter = 0;
            for (const auto& p : sa) {
                inter += sb.count(p);
            }
            const std::size_t uni = sa.size() + sb.size() - inter;
            const double jm = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
            const double pd = std::abs(static_cast<double>(sa.size()) - static_cast<double>(sb.size())) /
                              static_cast<double>(sb.size()) * 100.0;
            if (metrics::jaccard(a, b) != jm || metrics::pad(a, b) != pd) {
                ++mismatches;
            }
        }
        r.passed = mismatches == 0;
        r.detail = std::to_string(kPairs) + " random 16x16 pairs, " + std::to_string(mismatches) + " mismatches";
    }));
    out.push_back(timed("metrics/distances_vs_brute_force", [](CheckResult& r) {
        Rng rng(304);
        constexpr int kPairs = 100;
        int mismatches = 0, dominance = 0;
        std::size_t max_points = 0;
        for (int i = 0; i < kPairs; ++i) {
            Contour a, b;
            std::vector<Point> ra, rb;
            do {
                a = random_star(rng, 6.0);
                b = random_star(rng, 6.0);
                ra = resample_closed(a, metrics::kResamplePitch);
                rb = resample_closed(b, metrics::kResamplePitch);
            } while (ra.size() > 200 || rb.size() > 200);
            max_points = std::max({max_points, ra.size(), rb.size()});
            const BruteDistances oracle = brute_force_distances(ra, rb);
            const double hd = metrics::hausdorff(a, b);
            const double ad = metrics::avg_distance(a, b);
            if (hd != oracle.hd || ad != oracle.ad) {
                ++mismatches;
            }
            if (!(ad <= hd)) {
                ++dominance;
            }
        }
        r.passed = mismatches == 0 && dominance == 0;
        r.detail = std::to_string(kPairs) + " random contour pairs (<= " + std::to_string(max_points) +
                   " points), " + std::to_string(mismatches) + " mismatches, " + std::to_string(dominance) +
                   " ad>hd violations";
    }));
    return out;
}

// ---------------------------------------------------------------------------
// 4. Geometry

inline BinaryMask disc_mask(std::size_t size, Point center, double radius)
{
    BinaryMask m(size, size);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double dx = static_cast<double>(x) - center.x, dy = static_cast<double>(y) - center.y;
            m(x, y) = dx * dx + dy * dy <= radius * radius ? 1 : 0;
        }
    }
    return m;
}

/// Quarter turn of a square mask: output (x,y) takes input (y, n-1-x).
inline BinaryMask rotate_mask_quarter(const BinaryMask& m)
{
    const std::size_t n = m.width;
    BinaryMask out(n, n);
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            out(x, y) = m(y, n - 1 - x);
        }
    }
    return out;
}

/// True when `b` is a cyclic shift of `a`.
inline bool equal_up_to_rotation(const Contour& a, const Contour& b)
{
    const std::size_t n = a.vertices.size();
    if (n != b.vertices.size()) {
        return false;
    }
    for (std::size_t shift = 0; shift < n; ++shift) {
        bool same = true;
        for (std::size_t i = 0; i < n && same; ++i) {
            same = a.vertices[i] == b.vertices[(i + shift) % n];
        }
        if (same) {
            return true;
        }
    }
    return false;
}

inline std::vector<CheckResult> suite_geometry()
{
    std::vector<CheckResult> out;
    out.push_back(timed("geometry/disc_areas", [](CheckResult& r) {
        std::ostringstream detail;
        bool ok = true;
        for (double radius : {5.0, 10.0, 20.0}) {
            const Contour c = segment::extract_contour(disc_mask(64, {31.5, 31.5}, radius));
            const double expected = M_PI * radius * radius;
            const double rel = std::abs(area(c) - expected) / expected;
            ok = ok && rel <= 0.03;
            detail << "r=" << radius << " rel err " << fmt(rel) << "; ";
        }
        r.passed = ok;
        r.detail = detail.str() + "tol 0.03";
    }));
    out.push_back(timed("geometry/quarter_turn_consistency", [](CheckResult& r) {
        Rng rng(404);
        std::vector<BinaryMask> masks;
        for (int i = 0; i < 10; ++i) {
            masks.push_back(disc_mask(32, {rng.uniform(8, 24), rng.uniform(8, 24)}, rng.uniform(2, 7)));
            masks.push_back(segment::cleanup(random_mask(rng, 24, 24)));
        }
        for (std::uint64_t i = 0; i < 5; ++i) {
            const auto s = phantom::generate_phantom(phantom::PhantomSpec{}, i);
            masks.push_back(segment::binarize(s.labels, segment::Region::lumen));
            masks.push_back(segment::binarize(s.labels, segment::Region::lumen_plus_plaque));
        }
        int failures = 0;
        for (const auto& m : masks) {
            const double n1 = static_cast<double>(m.width) - 1.0;
            Contour expected = segment::extract_contour(m);
            for (auto& p : expected.vertices) {
                p = {n1 - p.y, p.x};
            }
            if (!equal_up_to_rotation(expected, segment::extract_contour(rotate_mask_quarter(m)))) {
                ++failures;
            }
        }
        r.passed = failures == 0;
        r.detail = std::to_string(masks.size()) + " masks, " + std::to_string(failures) + " inexact";
    }));
    return out;
}

// ---------------------------------------------------------------------------
// 5. Closed-loop ground truth

inline std::vector<CheckResult> suite_closed_loop()
{
    return {timed("closed_loop/phantom_truth", [](CheckResult& r) {
        constexpr std::uint64_t kSamples = 50;
        double worst_hd = 0.0;
        int bad_overlap = 0;
        for (std::uint64_t i = 0; i < kSamples; ++i) {
            const auto s = phantom::generate_phantom(phantom::PhantomSpec{}, i);
            const auto b = segment::lu_ma_boundaries(s.labels);
            worst_hd = std::max({worst_hd, metrics::hausdorff(b.lu, s.lu_contour),
                                 metrics::hausdorff(b.ma, s.ma_contour)});
            const auto rec = metrics::evaluate_sample(s.labels, s);
            if (rec.lu_jm != 1.0 || rec.ma_jm != 1.0 || rec.lu_pad != 0.0 || rec.ma_pad != 0.0) {
                ++bad_overlap;
            }
        }
        r.passed = worst_hd <= 1.0 && bad_overlap == 0;
        r.detail = std::to_string(kSamples) + " phantoms, max HD " + fmt(worst_hd) + " px (tol 1.0), " +
                   std::to_string(bad_overlap) + " with JM != 1 or PAD != 0";
    })};
}

// ---------------------------------------------------------------------------
// 10. Parameter counting

/// Closed-form generator parameter count (input is one condition channel,
/// plus one noise channel in channel-noise mode).
inline std::size_t closed_form_param_count(const nets::GeneratorConfig& cfg)
{
    const std::size_t d = cfg.resolved_depth();
    const std::size_t cap = cfg.resolved_cap();
    const auto e = [&](std::size_t i) { return std::min(cfg.base_channels << i, cap); };
    const std::size_t in = 1 + (cfg.noise_mode == nets::NoiseMode::channel ? 1 : 0);
    const std::size_t out = 3;
    std::size_t total = 0;
    if (!nets::is_hourglass(cfg.variant)) {
        const std::size_t skip = cfg.variant == nets::GeneratorVariant::unet ? 2 : 1;
        for (std::size_t i = 0; i < d; ++i) {
            const std::size_t prev = i == 0 ? in : e(i - 1);
            total += prev * e(i) * 16 + (i + 1 < d ? 2 * e(i) : e(i));
        }
        for (std::size_t j = d - 1; j >= 1; --j) {
            const std::size_t dec_in = j + 1 == d ? e(j) : skip * e(j);
            total += dec_in * e(j - 1) * 16 + 2 * e(j - 1);
        }
        total += skip * e(0) * out * 16 + out;
        return total;
    }
    const std::size_t c0 = e(0);
    total += in * c0 * 9 + 2 * c0;  // stem conv + BN
    std::size_t stack = 0;
    for (std::size_t i = 0; i < d; ++i) {
        const std::size_t ci = e(i), cn = e(i + 1);
        stack += 2 * ci * ci * 9 + 4 * ci;               // residual block
        stack += ci * cn * 16 + (i + 1 < d ? 2 * cn : cn);  // down conv + BN or bias
        stack += cn * ci * 16 + 2 * ci;                  // up conv + BN
    }
    stack += e(d) * e(d) * 9 + e(d);  // bottom conv + bias
    stack += c0 * out + out;          // head
    total += cfg.n_stacks * stack;
    if (cfg.variant == nets::GeneratorVariant::hourglass_reinject) {
        total += (cfg.n_stacks - 1) * ((c0 * c0 + c0) + (out * c0 + c0));
    }
    return total;
}

inline std::vector<CheckResult> suite_param_count()
{
    return {timed("param_count/closed_form_grid", [](CheckResult& r) {
        int mismatches = 0, order_violations = 0, cases = 0;
        std::string first_bad;
        for (std::size_t depth : {2, 3, 4}) {
            for (std::size_t base : {1, 2, 4}) {
                std::size_t count[4] = {};
                int k = 0;
                for (auto v : {nets::GeneratorVariant::unet, nets::GeneratorVariant::encoder_decoder,
                               nets::GeneratorVariant::hourglass_no_reinject,
                               nets::GeneratorVariant::hourglass_reinject}) {
                    nets::GeneratorConfig cfg;
                    cfg.variant = v;
                    cfg.image_size = 16;
                    cfg.depth = depth;
                    cfg.base_channels = base;
                    const nets::Generator<float> g(cfg, Rng(1));
                    count[k++] = g.param_count();
                    ++cases;
                    if (g.param_count() != closed_form_param_count(cfg)) {
                        ++mismatches;
                        if (first_bad.empty()) {
                            first_bad = std::string(nets::to_string(v)) + " depth " + std::to_string(depth) +
                                        " base " + std::to_string(base) + ": built " +
                                        std::to_string(g.param_count()) + " vs formula " +
                                        std::to_string(closed_form_param_count(cfg));
                        }
                    }
                }
                if (!(count[1] < count[0])) {
                    ++order_violations;
                }
            }
        }
        r.passed = mismatches == 0 && order_violations == 0;
        r.detail = std::to_string(cases) + " variant/grid cases, " + std::to_string(mismatches) + " mismatches, " +
                   std::to_string(order_violations) + " grid points with encoder_decoder >= unet" +
                   (first_bad.empty() ? "" : " (" + first_bad + ")");
    })};
}

// ---------------------------------------------------------------------------
// 11. Adam single-step oracle

inline std::vector<CheckResult> suite_adam()
{
    return {timed("adam/hand_computed_steps", [](CheckResult& r) {
        const train::AdamConfig cfg;  // lr 2e-4, beta1 0.5, beta2 0.999, eps 1e-8
        TensorD p(Shape{2}, std::vector<double>{0.5, -1.5}, true);
        train::Adam<double> opt({{"p", p}}, cfg);
        const double g1[2] = {0.8, -0.03};
        const double g2[2] = {-0.4, 0.05};
        const auto set_grad = [&](const double* g) {
            auto gr = p.mutable_grad();
            gr[0] = g[0];
            gr[1] = g[1];
        };
        // Step 1: m = (1-b1) g, v = (1-b2) g^2, bias correction leaves g and
        // g^2, so the update is lr * g / (|g| + eps).
        double expect[2];
        double m[2], v[2];
        for (int i = 0; i < 2; ++i) {
            m[i] = (1 - cfg.beta1) * g1[i];
            v[i] = (1 - cfg.beta2) * g1[i] * g1[i];
            expect[i] = p.data()[i] - cfg.lr * g1[i] / (std::abs(g1[i]) + cfg.eps);
        }
        set_grad(g1);
        opt.step();
        double err1 = 0.0;
        for (int i = 0; i < 2; ++i) {
            err1 = std::max(err1, std::abs(p.data()[i] - expect[i]));
        }
        // Step 2 with explicit moments.
        for (int i = 0; i < 2; ++i) {
            m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g2[i];
            v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g2[i] * g2[i];
            const double mhat = m[i] / (1 - cfg.beta1 * cfg.beta1);
            const double vhat = v[i] / (1 - cfg.beta2 * cfg.beta2);
            expect[i] = p.data()[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        set_grad(g2);
        opt.step();
        double err2 = 0.0;
        for (int i = 0; i < 2; ++i) {
            err2 = std::max(err2, std::abs(p.data()[i] - expect[i]));
        }
        r.passed = err1 <= 1e-12 && err2 <= 1e-12;
        r.detail = "step 1 max err " + fmt(err1) + ", step 2 max err " + fmt(err2) + ", tol 1e-12";
    })};
}

// ---------------------------------------------------------------------------
// Registry

struct Suite {
    std::string name;
    std::string criterion;
    std::function<std::vector<CheckResult>()> run;
};

inline const std::vector<Suite>& suites()
{
    static const std::vector<Suite> all = {
        {"gradients", "1", suite_gradients},         {"adjoint", "2", suite_adjoint},
        {"metric_oracles", "3", suite_metric_oracles}, {"geometry", "4", suite_geometry},
        {"closed_loop", "5", suite_closed_loop},      {"param_count", "10", suite_param_count},
        {"adam", "11", suite_adam},
    };
    return all;
}

}  // namespace ivgan::selftest
