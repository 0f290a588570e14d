#pragma once

// Synthetic IVUS-like cross sections with exact ground truth.
//
// Each phantom is two nested star-convex regions around a jittered center:
// the lumen r_lu(theta) and the media-adventitia border r_ma(theta) =
// r_lu(theta) + t(theta). Both radius functions are truncated Fourier series,
// so the ground-truth contours come straight from the analytic radius
// functions, not from the raster.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "ivgan/diffcore/rng.hpp"
#include "ivgan/error.hpp"
#include "ivgan/geometry.hpp"

namespace ivgan::phantom {

struct PhantomSpec {
    std::size_t image_size = 64;
    /// Fractions of half the image size.
    double lumen_radius_min = 0.25;
    double lumen_radius_max = 0.40;
    double plaque_thickness_min = 0.20;
    double plaque_thickness_max = 0.35;
    double center_jitter = 3.0;  // pixels
    double speckle_contrast = 0.5;
    double calcification_probability = 0.3;
    double shadow_attenuation = 0.6;
    double catheter_ring_radius = 3.0;  // pixels, 0 disables the ring
    std::uint64_t seed = 0;

    friend bool operator==(const PhantomSpec&, const PhantomSpec&) = default;
};

/// Largest relative modulation of the lumen radius around its base value.
inline constexpr double kLumenModulation = 0.15;
/// Largest relative modulation of the plaque thickness (eccentricity included).
inline constexpr double kThicknessModulation = 0.6;
inline constexpr std::size_t kHarmonics = 5;
inline constexpr std::size_t kContourVertices = 256;

// Base intensities on [0,1] before mapping to [-1,1].
inline constexpr double kLumenIntensity = 0.08;
inline constexpr double kPlaqueIntensity = 0.75;
inline constexpr double kTissueIntensity = 0.40;
inline constexpr double kCalcificationIntensity = 0.97;
inline constexpr double kCatheterIntensity = 0.85;

/// Background value of the condition image, in [-1,1].
inline constexpr float kBackgroundCondition = static_cast<float>(2.0 * kTissueIntensity - 1.0);

inline void validate(const PhantomSpec& s)
{
    auto fail = [](const std::string& msg) { throw ConfigError("phantom spec: " + msg); };
    if (s.image_size < 8 || (s.image_size & (s.image_size - 1)) != 0) {
        fail("image_size must be a power of two >= 8, got " + std::to_string(s.image_size));
    }
    if (!(s.lumen_radius_min > 0.0 && s.lumen_radius_min <= s.lumen_radius_max)) {
        fail("lumen_radius range must satisfy 0 < min <= max");
    }
    if (!(s.plaque_thickness_min > 0.0 && s.plaque_thickness_min <= s.plaque_thickness_max)) {
        fail("plaque_thickness range must satisfy 0 < min <= max");
    }
    if (!(s.lumen_radius_max + s.plaque_thickness_max < 1.0)) {
        fail("lumen_radius_max + plaque_thickness_max must stay below 1 (fractions of half-size)");
    }
    const double half = static_cast<double>(s.image_size) / 2.0;
    if (!(s.center_jitter >= 0.0 && s.center_jitter < 0.25 * half)) {
        fail("center_jitter must lie in [0, image_size/8)");
    }
    for (auto [name, p] : {std::pair{"speckle_contrast", s.speckle_contrast},
                           std::pair{"calcification_probability", s.calcification_probability},
                           std::pair{"shadow_attenuation", s.shadow_attenuation}}) {
        if (!(p >= 0.0 && p <= 1.0)) {
            fail(std::string(name) + " must lie in [0,1]");
        }
    }
    const double min_lumen = s.lumen_radius_min * half * (1.0 - kLumenModulation) * 0.8;
    if (!(s.catheter_ring_radius >= 0.0) ||
        (s.catheter_ring_radius > 0.0 && s.catheter_ring_radius + 1.0 >= min_lumen)) {
        fail("catheter_ring_radius must be 0 or fit inside the smallest lumen (< " + std::to_string(min_lumen - 1.0) +
             " px)");
    }
}

/// r(theta) = base * (1 + ecc*cos(theta - phase) + sum_k a_k cos(k theta) + b_k sin(k theta))
struct RadiusFunction {
    double base = 0.0;
    double eccentricity = 0.0;
    double phase = 0.0;
    std::array<double, kHarmonics> cos_coef{};
    std::array<double, kHarmonics> sin_coef{};

    double operator()(double theta) const
    {
        double m = 1.0 + eccentricity * std::cos(theta - phase);
        for (std::size_t k = 0; k < kHarmonics; ++k) {
            const double kt = static_cast<double>(k + 1) * theta;
            m += cos_coef[k] * std::cos(kt) + sin_coef[k] * std::sin(kt);
        }
        return base * m;
    }

    double modulation_bound() const
    {
        double b = std::abs(eccentricity);
        for (std::size_t k = 0; k < kHarmonics; ++k) {
            b += std::abs(cos_coef[k]) + std::abs(sin_coef[k]);
        }
        return b;
    }
};

struct Calcification {
    bool present = false;
    double angle = 0.0;       // center of the arc, radians
    double half_width = 0.0;  // radians
    double inner_frac = 0.0;  // radial band as fractions of the plaque thickness
    double outer_frac = 0.0;
};

/// Everything that determines a phantom's geometry.
struct PhantomGeometry {
    Point center;
    RadiusFunction lumen;
    RadiusFunction thickness;
    Calcification calcification;

    double lu_radius(double theta) const { return lumen(theta); }
    double ma_radius(double theta) const { return lumen(theta) + thickness(theta); }
};

struct Sample {
    std::uint64_t index = 0;
    Image condition;  // [1,H,W] in [-1,1]
    Image target;     // [3,H,W], one-hot class image mapped to {-1,+1}
    LabelMask labels;
    Contour lu_contour;
    Contour ma_contour;
    Point center;

    friend bool operator==(const Sample&, const Sample&) = default;
};

/// One-hot {-1,+1} class image for a label map.
inline Image target_from_labels(const LabelMask& labels)
{
    Image v(kNumClasses, labels.height, labels.width, -1.0f);
    for (std::size_t y = 0; y < labels.height; ++y) {
        for (std::size_t x = 0; x < labels.width; ++x) {
            v.at(labels(x, y), y, x) = 1.0f;
        }
    }
    return v;
}

inline Point image_center(std::size_t size)
{
    const double c = (static_cast<double>(size) - 1.0) / 2.0;
    return {c, c};
}

inline double wrap_angle(double a)
{
    a = std::fmod(a, 2.0 * std::numbers::pi);
    return a < 0.0 ? a + 2.0 * std::numbers::pi : a;
}

inline double angular_distance(double a, double b)
{
    const double d = std::abs(wrap_angle(a) - wrap_angle(b));
    return std::min(d, 2.0 * std::numbers::pi - d);
}

/// The deterministic geometry of phantom `index`.
inline PhantomGeometry describe_phantom(const PhantomSpec& spec, std::uint64_t index)
{
    validate(spec);
    Rng rng = Rng(spec.seed).fork("phantom.geometry").fork(index);
    const double half = static_cast<double>(spec.image_size) / 2.0;
    PhantomGeometry g;

    const Point c0 = image_center(spec.image_size);
    g.center = {c0.x + rng.uniform(-spec.center_jitter, spec.center_jitter),
                c0.y + rng.uniform(-spec.center_jitter, spec.center_jitter)};

    g.lumen.base = rng.uniform(spec.lumen_radius_min, spec.lumen_radius_max) * half;
    for (std::size_t k = 0; k < kHarmonics; ++k) {
        const double sd = 0.05 / static_cast<double>(k + 1);
        g.lumen.cos_coef[k] = rng.normal(0.0, sd);
        g.lumen.sin_coef[k] = rng.normal(0.0, sd);
    }
    if (const double m = g.lumen.modulation_bound(); m > kLumenModulation) {
        for (std::size_t k = 0; k < kHarmonics; ++k) {
            g.lumen.cos_coef[k] *= kLumenModulation / m;
            g.lumen.sin_coef[k] *= kLumenModulation / m;
        }
    }

    g.thickness.base = rng.uniform(spec.plaque_thickness_min, spec.plaque_thickness_max) * half;
    g.thickness.eccentricity = rng.uniform(0.0, 0.5);
    g.thickness.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t k = 1; k < kHarmonics; ++k) {
        const double sd = 0.04 / static_cast<double>(k + 1);
        g.thickness.cos_coef[k] = rng.normal(0.0, sd);
        g.thickness.sin_coef[k] = rng.normal(0.0, sd);
    }
    if (const double m = g.thickness.modulation_bound(); m > kThicknessModulation) {
        const double f = kThicknessModulation / m;
        g.thickness.eccentricity *= f;
        for (std::size_t k = 0; k < kHarmonics; ++k) {
            g.thickness.cos_coef[k] *= f;
            g.thickness.sin_coef[k] *= f;
        }
    }

    // Keep the outer border at least 1.5 px inside the frame.
    const double limit = std::min({g.center.x, g.center.y, static_cast<double>(spec.image_size) - 1.0 - g.center.x,
                                   static_cast<double>(spec.image_size) - 1.0 - g.center.y}) -
                         1.5;
    double outer = 0.0;
    for (int i = 0; i < 720; ++i) {
        outer = std::max(outer, g.ma_radius(2.0 * std::numbers::pi * i / 720.0));
    }
    const double bound = g.lumen.base * (1.0 + g.lumen.modulation_bound()) +
                         g.thickness.base * (1.0 + g.thickness.modulation_bound());
    outer = std::max(outer, bound);
    if (outer > limit) {
        const double f = limit / outer;
        g.lumen.base *= f;
        g.thickness.base *= f;
    }

    g.calcification.present = rng.bernoulli(spec.calcification_probability);
    g.calcification.angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    g.calcification.half_width = rng.uniform(15.0, 35.0) * std::numbers::pi / 180.0;
    g.calcification.inner_frac = rng.uniform(0.45, 0.6);
    g.calcification.outer_frac = rng.uniform(0.75, 0.9);
    return g;
}

inline Contour polar_contour(Point center, const auto& radius_fn, std::size_t n_vertices = kContourVertices)
{
    Contour c;
    c.vertices.reserve(n_vertices);
    for (std::size_t i = 0; i < n_vertices; ++i) {
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n_vertices);
        const double r = radius_fn(theta);
        c.vertices.push_back({center.x + r * std::cos(theta), center.y + r * std::sin(theta)});
    }
    return c;
}

/// Rasterized class of one pixel center.
inline TissueClass classify_pixel(const PhantomGeometry& g, double x, double y)
{
    const double dx = x - g.center.x;
    const double dy = y - g.center.y;
    const double d = std::hypot(dx, dy);
    const double theta = std::atan2(dy, dx);
    if (d < g.lu_radius(theta)) {
        return TissueClass::lumen;
    }
    if (d < g.ma_radius(theta)) {
        return TissueClass::plaque;
    }
    return TissueClass::tissue;
}

/// Renders phantom `index`. Pure function of (spec, index).
inline Sample generate_phantom(const PhantomSpec& spec, std::uint64_t index)
{
    const PhantomGeometry g = describe_phantom(spec, index);
    const std::size_t n = spec.image_size;
    Sample s;
    s.index = index;
    s.center = g.center;
    s.labels = LabelMask(n, n);
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            s.labels(x, y) = static_cast<std::uint8_t>(classify_pixel(g, static_cast<double>(x), static_cast<double>(y)));
        }
    }

    // Spatially correlated speckle: 3x3 box-filtered Gaussian field rescaled to
    // unit variance.
    Rng noise_rng = Rng(spec.seed).fork("phantom.speckle").fork(index);
    std::vector<double> white(n * n);
    for (auto& w : white) {
        w = noise_rng.normal();
    }
    std::vector<double> speckle(n * n, 0.0);
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            double acc = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const auto xx = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(x) + dx, 0, static_cast<long>(n) - 1));
                    const auto yy = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(y) + dy, 0, static_cast<long>(n) - 1));
                    acc += white[yy * n + xx];
                }
            }
            speckle[y * n + x] = acc / 3.0;
        }
    }

    const Calcification& calc = g.calcification;
    s.condition = Image(1, n, n);
    for (std::size_t y = 0; y < n; ++y) {
        for (std::size_t x = 0; x < n; ++x) {
            const double dx = static_cast<double>(x) - g.center.x;
            const double dy = static_cast<double>(y) - g.center.y;
            const double d = std::hypot(dx, dy);
            const double theta = std::atan2(dy, dx);
            const double z = speckle[y * n + x];
            double v = 0.0;
            switch (static_cast<TissueClass>(s.labels(x, y))) {
            case TissueClass::lumen:
                v = kLumenIntensity * (1.0 + 0.5 * spec.speckle_contrast * z);
                break;
            case TissueClass::plaque:
                v = kPlaqueIntensity * (1.0 + spec.speckle_contrast * z);
                break;
            case TissueClass::tissue:
                v = kTissueIntensity * (1.0 + 0.6 * spec.speckle_contrast * z);
                break;
            }
            if (calc.present && angular_distance(theta, calc.angle) <= calc.half_width) {
                const double r_lu = g.lu_radius(theta);
                const double t = g.thickness(theta);
                const double r_in = r_lu + calc.inner_frac * t;
                const double r_out = r_lu + calc.outer_frac * t;
                if (d >= r_in && d <= r_out) {
                    v = kCalcificationIntensity * (1.0 + 0.1 * spec.speckle_contrast * z);
                } else if (d > r_out) {
                    v *= 1.0 - spec.shadow_attenuation;
                }
            }
            if (spec.catheter_ring_radius > 0.0 && std::abs(d - spec.catheter_ring_radius) <= 0.6) {
                v = kCatheterIntensity;
            }
            v = std::clamp(v, 0.0, 1.0);
            s.condition.at(0, y, x) = static_cast<float>(2.0 * v - 1.0);
        }
    }

    s.target = target_from_labels(s.labels);
    s.lu_contour = polar_contour(g.center, [&](double th) { return g.lu_radius(th); });
    s.ma_contour = polar_contour(g.center, [&](double th) { return g.ma_radius(th); });
    return s;
}

/// Intensities along the ray center + r (cos a, sin a), r = k * max_radius /
/// (n_samples - 1), bilinearly interpolated. One sample means r = 0.
inline std::vector<double> profile_line(const Image& image, Point center, double angle_degrees, double max_radius,
                                        std::size_t n_samples)
{
    if (n_samples == 0) {
        throw ConfigError("profile_line needs at least one sample");
    }
    if (image.channels < 1 || image.width == 0 || image.height == 0) {
        throw ShapeError("profile_line needs a non-empty image");
    }
    const double rad = angle_degrees * std::numbers::pi / 180.0;
    const double ux = std::cos(rad);
    const double uy = std::sin(rad);
    const double w = static_cast<double>(image.width) - 1.0;
    const double h = static_cast<double>(image.height) - 1.0;
    auto inside = [&](double x, double y) {
        constexpr double tol = 1e-9;
        return x >= -tol && y >= -tol && x <= w + tol && y <= h + tol;
    };
    const double r_end = n_samples == 1 ? 0.0 : max_radius;
    if (!inside(center.x, center.y) || !inside(center.x + r_end * ux, center.y + r_end * uy)) {
        throw ShapeError("profile ray leaves the image bounds");
    }
    std::vector<double> out(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) {
        const double r = n_samples == 1 ? 0.0 : max_radius * static_cast<double>(k) / static_cast<double>(n_samples - 1);
        const double x = std::clamp(center.x + r * ux, 0.0, w);
        const double y = std::clamp(center.y + r * uy, 0.0, h);
        out[k] = bilinear(image, 0, x, y);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Datasets

struct Dataset {
    PhantomSpec spec;
    std::vector<Sample> train;
    std::vector<Sample> val;
    std::vector<Sample> test;
    nlohmann::json manifest;
};

inline nlohmann::json spec_to_json(const PhantomSpec& s)
{
    return nlohmann::json{
        {"image_size", s.image_size},
        {"lumen_radius_min", s.lumen_radius_min},
        {"lumen_radius_max", s.lumen_radius_max},
        {"plaque_thickness_min", s.plaque_thickness_min},
        {"plaque_thickness_max", s.plaque_thickness_max},
        {"center_jitter", s.center_jitter},
        {"speckle_contrast", s.speckle_contrast},
        {"calcification_probability", s.calcification_probability},
        {"shadow_attenuation", s.shadow_attenuation},
        {"catheter_ring_radius", s.catheter_ring_radius},
        {"seed", s.seed},
    };
}

inline PhantomSpec spec_from_json(const nlohmann::json& j)
{
    PhantomSpec s;
    try {
        s.image_size = j.at("image_size").get<std::size_t>();
        s.lumen_radius_min = j.at("lumen_radius_min").get<double>();
        s.lumen_radius_max = j.at("lumen_radius_max").get<double>();
        s.plaque_thickness_min = j.at("plaque_thickness_min").get<double>();
        s.plaque_thickness_max = j.at("plaque_thickness_max").get<double>();
        s.center_jitter = j.at("center_jitter").get<double>();
        s.speckle_contrast = j.at("speckle_contrast").get<double>();
        s.calcification_probability = j.at("calcification_probability").get<double>();
        s.shadow_attenuation = j.at("shadow_attenuation").get<double>();
        s.catheter_ring_radius = j.at("catheter_ring_radius").get<double>();
        s.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("phantom spec json: ") + e.what());
    }
    validate(s);
    return s;
}

inline std::string sample_stem(const std::string& split, std::uint64_t index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05llu", static_cast<unsigned long long>(index));
    return split + "/" + buf;
}

inline nlohmann::json make_manifest(const PhantomSpec& spec, std::size_t n_train, std::size_t n_val,
                                    std::size_t n_test)
{
    nlohmann::json splits = nlohmann::json::object();
    nlohmann::json files = nlohmann::json::array();
    std::uint64_t next = 0;
    for (auto [name, count] : {std::pair{"train", n_train}, std::pair{"val", n_val}, std::pair{"test", n_test}}) {
        nlohmann::json idx = nlohmann::json::array();
        for (std::size_t i = 0; i < count; ++i, ++next) {
            idx.push_back(next);
            const std::string stem = sample_stem(name, next);
            for (const char* suffix : {"_image.pgm", "_labels.pgm", "_lu.txt", "_ma.txt"}) {
                files.push_back(stem + suffix);
            }
        }
        splits[name] = idx;
    }
    return nlohmann::json{{"format", "ivgan-dataset-1"}, {"spec", spec_to_json(spec)}, {"splits", splits}, {"files", files}};
}

/// Train/val/test splits over consecutive, disjoint phantom indices.
inline Dataset make_dataset(const PhantomSpec& spec, std::size_t n_train, std::size_t n_val, std::size_t n_test)
{
    validate(spec);
    if (n_train < 1 || n_val < 1 || n_test < 1) {
        throw ConfigError("make_dataset: every split needs at least one sample");
    }
    Dataset d;
    d.spec = spec;
    d.manifest = make_manifest(spec, n_train, n_val, n_test);
    std::uint64_t next = 0;
    for (std::size_t i = 0; i < n_train; ++i) {
        d.train.push_back(generate_phantom(spec, next++));
    }
    for (std::size_t i = 0; i < n_val; ++i) {
        d.val.push_back(generate_phantom(spec, next++));
    }
    for (std::size_t i = 0; i < n_test; ++i) {
        d.test.push_back(generate_phantom(spec, next++));
    }
    return d;
}

/// Regenerates a dataset from a manifest (spec + split indices).
inline Dataset dataset_from_manifest(const nlohmann::json& manifest)
{
    Dataset d;
    d.spec = spec_from_json(manifest.at("spec"));
    d.manifest = manifest;
    auto load = [&](const char* name, std::vector<Sample>& out) {
        for (const auto& idx : manifest.at("splits").at(name)) {
            out.push_back(generate_phantom(d.spec, idx.get<std::uint64_t>()));
        }
    };
    load("train", d.train);
    load("val", d.val);
    load("test", d.test);
    return d;
}

}  // namespace ivgan::phantom
