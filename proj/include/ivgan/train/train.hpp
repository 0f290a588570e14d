#pragma once

// Alternating adversarial training. Per batch:
//   1. fake = F(u, c), computed once and detached for the discriminator;
//   2. d_steps_per_g discriminator updates on 0.5 * d_loss(S(u,v), S(u,fake));
//   3. one generator update on combined_g_loss(S(u,F(u,c)), v, F(u,c)).
// Every random draw comes from a stream forked off the run seed, so
// (configs, data, seed) determine the history and final weights bitwise.

#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "ivgan/augment/augment.hpp"
#include "ivgan/error.hpp"
#include "ivgan/losses/losses.hpp"
#include "ivgan/metrics/metrics.hpp"
#include "ivgan/nets/checkpoint.hpp"
#include "ivgan/phantom/phantom.hpp"
#include "ivgan/segment/segment.hpp"
#include "ivgan/train/adam.hpp"

namespace ivgan::train {

using phantom::Sample;

struct TrainConfig {
    std::size_t epochs = 40;
    std::size_t batch_size = 1;
    AdamConfig adam;
    std::size_t d_steps_per_g = 1;
    losses::LossWeights weights;
    std::uint64_t seed = 0;
    std::size_t eval_every = 1;  // 0 disables per-epoch validation
    std::size_t augment_rotations = 0;
    std::vector<double> augment_scales;

    void validate() const
    {
        if (epochs < 1) {
            throw ConfigError("train.epochs must be >= 1");
        }
        if (batch_size < 1) {
            throw ConfigError("train.batch_size must be >= 1");
        }
        if (d_steps_per_g < 1) {
            throw ConfigError("train.d_steps_per_g must be >= 1");
        }
        adam.validate();
        weights.validate();
    }
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double d_loss = 0.0;
    double g_adv = 0.0;  // a * g_adv, batch mean
    double g_rec = 0.0;  // b * rec, batch mean
    bool evaluated = false;
    metrics::MetricsSummary validation;
};

struct History {
    std::vector<EpochRecord> records;
};

inline constexpr const char* kHistoryColumns[] = {"epoch", "d_loss", "g_adv", "g_rec", "lu_jm", "ma_jm",
                                                  "lu_pad", "ma_pad", "lu_hd", "ma_hd", "lu_ad", "ma_ad"};

inline std::string format_number(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

/// One header row then one row per epoch. Validation columns are empty on
/// epochs without evaluation and "nan" for metrics with no present values.
inline void write_history_csv(std::ostream& os, const History& h)
{
    for (std::size_t i = 0; i < std::size(kHistoryColumns); ++i) {
        os << (i ? "," : "") << kHistoryColumns[i];
    }
    os << '\n';
    for (const auto& r : h.records) {
        os << r.epoch << ',' << format_number(r.d_loss) << ',' << format_number(r.g_adv) << ','
           << format_number(r.g_rec);
        for (std::size_t m = 0; m < 8; ++m) {
            os << ',';
            if (r.evaluated) {
                os << format_number(r.validation.mean[m]);
            }
        }
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Batching and inference

template <class T>
struct Batch {
    Tensor<T> u;  // [B,1,H,W]
    Tensor<T> v;  // [B,3,H,W]
};

template <class T>
Batch<T> make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices)
{
    if (indices.empty()) {
        throw Error("make_batch: empty batch");
    }
    const Sample& first = samples.at(indices[0]);
    const std::size_t h = first.condition.height, w = first.condition.width;
    const std::size_t cu = first.condition.channels, cv = first.target.channels;
    std::vector<T> u, v;
    u.reserve(indices.size() * cu * h * w);
    v.reserve(indices.size() * cv * h * w);
    for (std::size_t i : indices) {
        const Sample& s = samples.at(i);
        if (s.condition.height != h || s.condition.width != w || s.condition.channels != cu ||
            s.target.channels != cv) {
            throw ShapeError("make_batch: samples differ in size");
        }
        u.insert(u.end(), s.condition.values.begin(), s.condition.values.end());
        v.insert(v.end(), s.target.values.begin(), s.target.values.end());
    }
    const std::size_t n = indices.size();
    return {Tensor<T>(Shape{n, cu, h, w}, std::move(u)), Tensor<T>(Shape{n, cv, h, w}, std::move(v))};
}

/// Batch statistics are used at inference only when whole batches of at
/// least two samples are evaluated; otherwise running statistics.
inline nets::Phase inference_phase(std::size_t batch_size)
{
    return batch_size >= 2 ? nets::Phase::eval_batch_stats : nets::Phase::eval;
}

/// Generator predictions for every sample, evaluated in chunks of
/// `batch_size`. The noise stream is derived from `noise_seed` so repeated
/// calls agree bitwise.
template <class T>
std::vector<Image> predict(const nets::Generator<T>& gen, const std::vector<Sample>& samples, std::size_t batch_size,
                           const Rng& noise)
{
    std::vector<Image> out;
    out.reserve(samples.size());
    Rng rng = noise;
    const nets::Phase phase = inference_phase(batch_size);
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(samples.size(), start + batch_size); ++i) {
            idx.push_back(i);
        }
        const Batch<T> b = make_batch<T>(samples, idx);
        const Tensor<T> pred = gen.forward(b.u, rng, idx.size() >= 2 ? phase : nets::Phase::eval).prediction;
        const std::size_t c = pred.dim(1), h = pred.dim(2), w = pred.dim(3);
        const auto values = pred.data();
        for (std::size_t k = 0; k < idx.size(); ++k) {
            Image img(c, h, w);
            for (std::size_t j = 0; j < c * h * w; ++j) {
                img.values[j] = static_cast<float>(values[k * c * h * w + j]);
            }
            out.push_back(std::move(img));
        }
    }
    return out;
}

struct Evaluation {
    std::vector<LabelMask> predictions;
    std::vector<metrics::MetricsRecord> records;
    metrics::MetricsSummary summary;
};

template <class T>
Evaluation evaluate(const nets::Generator<T>& gen, const std::vector<Sample>& samples, std::size_t batch_size,
                    const Rng& noise, const metrics::Calibration& cal = {})
{
    Evaluation ev;
    for (const Image& img : predict(gen, samples, batch_size, noise)) {
        ev.predictions.push_back(segment::predict_labels(img));
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ev.records.push_back(metrics::evaluate_sample(ev.predictions[i], samples[i], cal));
    }
    ev.summary = metrics::aggregate(ev.records);
    return ev;
}

// ---------------------------------------------------------------------------
// Training

using EpochCallback = std::function<void(const EpochRecord&)>;

namespace detail {

inline void require_finite(double v, const char* what, std::size_t epoch, std::size_t step)
{
    if (!std::isfinite(v)) {
        throw NumericError(std::string("non-finite ") + what + " at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step));
    }
}

}  // namespace detail

/// Trains `model` in place and returns the per-epoch history. `val` may be
/// empty, in which case no validation metrics are recorded.
template <class T>
History train(nets::GanModel<T>& model, const std::vector<Sample>& train_samples, const std::vector<Sample>& val,
              const TrainConfig& cfg, const EpochCallback& on_epoch = {})
{
    cfg.validate();
    if (train_samples.empty()) {
        throw ConfigError("training set is empty");
    }
    const std::vector<Sample> data =
        (cfg.augment_rotations > 0 || !cfg.augment_scales.empty())
            ? augment::augment_dataset(train_samples, cfg.augment_rotations, cfg.augment_scales, cfg.seed)
            : train_samples;

    nets::Generator<T>& gen = *model.generator;
    nets::Discriminator<T>& disc = *model.discriminator;
    Adam<T> opt_g(gen.parameters(), cfg.adam);
    Adam<T> opt_d(disc.parameters(), cfg.adam);
    const Rng root(cfg.seed);
    Rng noise = root.fork("train.noise");
    const Rng shuffle_root = root.fork("train.shuffle");
    const Rng eval_noise = root.fork("eval.noise");
    const auto& w = cfg.weights;

    History history;
    std::vector<std::size_t> order(data.size());
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng = shuffle_root.fork(epoch);
        ivgan::shuffle(order, shuffle_rng);

        EpochRecord rec;
        rec.epoch = epoch;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() +
                                                   static_cast<std::ptrdiff_t>(std::min(order.size(), start + cfg.batch_size)));
            const Batch<T> b = make_batch<T>(data, idx);
            ++steps;

            const nets::GeneratorOutput<T> out = gen.forward(b.u, noise, nets::Phase::train);
            const Tensor<T> fake = out.prediction.detach();

            double d_value = 0.0;
            for (std::size_t k = 0; k < cfg.d_steps_per_g; ++k) {
                opt_d.zero_grad();
                const Tensor<T> dl = losses::d_loss(disc.forward(b.u, b.v, nets::Phase::train),
                                                    disc.forward(b.u, fake, nets::Phase::train));
                d_value = static_cast<double>(dl.item());
                detail::require_finite(d_value, "discriminator loss", epoch, steps);
                backward(ops::scale(dl, T(0.5)));
                opt_d.step();
            }

            opt_g.zero_grad();
            Tensor<T> s_fake;
            if (w.a > 0.0) {
                s_fake = disc.forward(b.u, out.prediction, nets::Phase::train);
            }
            const losses::GeneratorLoss<T> gl = losses::combined_g_loss(s_fake, b.v, out.prediction,
                                                                        out.intermediates, w);
            detail::require_finite(gl.adversarial, "generator adversarial loss", epoch, steps);
            detail::require_finite(gl.reconstruction, "generator reconstruction loss", epoch, steps);
            backward(gl.total);
            opt_g.step();

            rec.d_loss += d_value;
            rec.g_adv += gl.adversarial;
            rec.g_rec += gl.reconstruction;
        }
        rec.d_loss /= static_cast<double>(steps);
        rec.g_adv /= static_cast<double>(steps);
        rec.g_rec /= static_cast<double>(steps);

        const bool last = epoch == cfg.epochs;
        if (!val.empty() && cfg.eval_every > 0 && (epoch % cfg.eval_every == 0 || last)) {
            rec.evaluated = true;
            rec.validation = evaluate(gen, val, cfg.batch_size, eval_noise.fork(epoch)).summary;
        }
        history.records.push_back(rec);
        if (on_epoch) {
            on_epoch(rec);
        }
    }
    return history;
}

}  // namespace ivgan::train
