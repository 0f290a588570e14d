#pragma once

// Run configuration files.
//
// Format: a TOML subset.
//
//   # comment
//   [section]
//   key = 42            # integer / float
//   key = "text"        # string (bare words are accepted as strings too)
//   key = true          # boolean
//   key = [0.9, 1.1]    # flat array of scalars
//
// Every key maps to one field of RunConfig (see apply_key for the table).
// Unknown sections or keys are errors reported with their line number.
// Command-line overrides use the same "section.key=value" vocabulary and are
// applied after the file, so flags win.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ivgan/diffcore/rng.hpp"
#include "ivgan/error.hpp"
#include "ivgan/losses/losses.hpp"
#include "ivgan/nets/checkpoint.hpp"
#include "ivgan/phantom/dataset_io.hpp"
#include "ivgan/phantom/phantom.hpp"
#include "ivgan/train/train.hpp"

namespace ivgan::harness {

namespace fs = std::filesystem;

inline constexpr const char* kOutputRootEnv = "IVGAN_OUTPUT_ROOT";
inline constexpr const char* kBuildVersion = "ivgan 1.0.0";

enum class ExperimentKind { loss_ablation, beta_sweep_l1, beta_sweep_l2, generator_comparison };

inline const char* to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::loss_ablation:
        return "loss_ablation";
    case ExperimentKind::beta_sweep_l1:
        return "beta_sweep_l1";
    case ExperimentKind::beta_sweep_l2:
        return "beta_sweep_l2";
    case ExperimentKind::generator_comparison:
        return "generator_comparison";
    }
    return "?";
}

inline ExperimentKind parse_experiment_kind(const std::string& s)
{
    for (auto k : {ExperimentKind::loss_ablation, ExperimentKind::beta_sweep_l1, ExperimentKind::beta_sweep_l2,
                   ExperimentKind::generator_comparison}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw ConfigError("unknown experiment '" + s +
                      "' (expected loss_ablation, beta_sweep_l1, beta_sweep_l2, generator_comparison)");
}

struct DataConfig {
    std::string dir;  // empty: generate phantoms in memory from [phantom]
    std::size_t n_train = 32;
    std::size_t n_val = 8;
    std::size_t n_test = 8;
};

struct OutputConfig {
    std::string dir = "runs/default";
    double pixel_spacing = 1.0;
    bool save_checkpoint = true;
    bool overlays = true;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::loss_ablation;
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    bool save_checkpoints = false;
};

struct RunConfig {
    DataConfig data;
    phantom::PhantomSpec phantom;
    nets::GeneratorConfig generator;
    nets::DiscriminatorConfig discriminator;
    train::TrainConfig train;
    OutputConfig output;
    ExperimentConfig experiment;

    /// Propagates shared fields (image size) and validates every section.
    void finalize()
    {
        generator.image_size = phantom.image_size;
        discriminator.image_size = phantom.image_size;
        phantom::validate(phantom);
        generator.validate();
        discriminator.validate();
        train.validate();
        if (data.n_train < 1 || data.n_val < 1 || data.n_test < 1) {
            throw ConfigError("data.n_train, data.n_val and data.n_test must be >= 1");
        }
        if (!(output.pixel_spacing > 0.0)) {
            throw ConfigError("output.pixel_spacing must be positive");
        }
        if (experiment.seeds.empty()) {
            throw ConfigError("experiment.seeds must list at least one seed");
        }
    }
};

// ---------------------------------------------------------------------------
// Parsing

struct Value {
    enum class Kind { scalar, string, array } kind = Kind::scalar;
    std::string text;                 // scalar or string content
    std::vector<std::string> items;  // array items (unquoted)
    std::string where;               // "file:line" or "--set" for messages
};

struct Entry {
    std::string section;
    std::string key;
    Value value;
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Removes a trailing comment that is not inside a quoted string.
inline std::string strip_comment(const std::string& line)
{
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') {
            quoted = !quoted;
        } else if (line[i] == '#' && !quoted) {
            return line.substr(0, i);
        }
    }
    return line;
}

inline std::string unquote(const std::string& s, const std::string& where)
{
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        const std::string inner = s.substr(1, s.size() - 2);
        if (inner.find('"') != std::string::npos) {
            throw ConfigError(where + ": stray quote in string value");
        }
        return inner;
    }
    if (!s.empty() && (s.front() == '"' || s.back() == '"')) {
        throw ConfigError(where + ": unterminated string");
    }
    return s;
}

inline Value parse_value(const std::string& raw, const std::string& where)
{
    const std::string s = trim(raw);
    if (s.empty()) {
        throw ConfigError(where + ": missing value");
    }
    Value v;
    v.where = where;
    if (s.front() == '[') {
        if (s.back() != ']') {
            throw ConfigError(where + ": unterminated array");
        }
        v.kind = Value::Kind::array;
        const std::string body = trim(s.substr(1, s.size() - 2));
        if (!body.empty()) {
            std::stringstream ss(body);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = trim(item);
                if (item.empty()) {
                    throw ConfigError(where + ": empty array element");
                }
                v.items.push_back(unquote(item, where));
            }
        }
        return v;
    }
    if (s.front() == '"') {
        v.kind = Value::Kind::string;
        v.text = unquote(s, where);
        return v;
    }
    v.text = unquote(s, where);
    return v;
}

}  // namespace detail

/// Parses config text into ordered entries. `name` prefixes error messages.
inline std::vector<Entry> parse_config_text(const std::string& text, const std::string& name)
{
    std::vector<Entry> out;
    std::istringstream is(text);
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string where = name + ":" + std::to_string(lineno);
        const std::string s = detail::trim(detail::strip_comment(line));
        if (s.empty()) {
            continue;
        }
        if (s.front() == '[') {
            if (s.back() != ']' || s.size() < 3) {
                throw ConfigError(where + ": malformed section header '" + s + "'");
            }
            section = detail::trim(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected 'key = value', got '" + s + "'");
        }
        const std::string key = detail::trim(s.substr(0, eq));
        if (key.empty()) {
            throw ConfigError(where + ": missing key before '='");
        }
        if (section.empty()) {
            throw ConfigError(where + ": key '" + key + "' appears before any [section]");
        }
        out.push_back({section, key, detail::parse_value(s.substr(eq + 1), where)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Typed conversion

namespace detail {

inline const std::string& scalar_text(const Value& v, const std::string& key)
{
    if (v.kind == Value::Kind::array) {
        throw ConfigError(v.where + ": " + key + " expects a single value, not an array");
    }
    return v.text;
}

inline double to_double(const std::string& s, const std::string& where, const std::string& key)
{
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(d)) {
        throw ConfigError(where + ": " + key + " expects a number, got '" + s + "'");
    }
    return d;
}

inline std::uint64_t to_uint(const std::string& s, const std::string& where, const std::string& key)
{
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(where + ": " + key + " expects a non-negative integer, got '" + s + "'");
    }
    try {
        return std::stoull(s);
    } catch (const std::exception&) {
        throw ConfigError(where + ": " + key + " is out of range");
    }
}

inline bool to_bool(const std::string& s, const std::string& where, const std::string& key)
{
    if (s == "true") {
        return true;
    }
    if (s == "false") {
        return false;
    }
    throw ConfigError(where + ": " + key + " expects true or false, got '" + s + "'");
}

}  // namespace detail

/// Assigns one "section.key" value onto `cfg`.
inline void apply_key(RunConfig& cfg, const std::string& section, const std::string& key, const Value& v)
{
    const std::string full = section + "." + key;
    const auto num = [&] { return detail::to_double(detail::scalar_text(v, full), v.where, full); };
    const auto uint = [&] { return static_cast<std::size_t>(detail::to_uint(detail::scalar_text(v, full), v.where, full)); };
    const auto u64 = [&] { return detail::to_uint(detail::scalar_text(v, full), v.where, full); };
    const auto boolean = [&] { return detail::to_bool(detail::scalar_text(v, full), v.where, full); };
    const auto str = [&] { return detail::scalar_text(v, full); };
    const auto wrap = [&](auto&& fn) {
        try {
            fn();
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            if (msg.rfind(v.where, 0) == 0) {
                throw;
            }
            throw ConfigError(v.where + ": " + msg);
        }
    };

    using Setter = std::function<void()>;
    auto& p = cfg.phantom;
    auto& g = cfg.generator;
    auto& d = cfg.discriminator;
    auto& t = cfg.train;
    const std::map<std::string, Setter> table = {
        {"data.dir", [&] { cfg.data.dir = str(); }},
        {"data.n_train", [&] { cfg.data.n_train = uint(); }},
        {"data.n_val", [&] { cfg.data.n_val = uint(); }},
        {"data.n_test", [&] { cfg.data.n_test = uint(); }},
        {"phantom.image_size", [&] { p.image_size = uint(); }},
        {"phantom.lumen_radius_min", [&] { p.lumen_radius_min = num(); }},
        {"phantom.lumen_radius_max", [&] { p.lumen_radius_max = num(); }},
        {"phantom.plaque_thickness_min", [&] { p.plaque_thickness_min = num(); }},
        {"phantom.plaque_thickness_max", [&] { p.plaque_thickness_max = num(); }},
        {"phantom.center_jitter", [&] { p.center_jitter = num(); }},
        {"phantom.speckle_contrast", [&] { p.speckle_contrast = num(); }},
        {"phantom.calcification_probability", [&] { p.calcification_probability = num(); }},
        {"phantom.shadow_attenuation", [&] { p.shadow_attenuation = num(); }},
        {"phantom.catheter_ring_radius", [&] { p.catheter_ring_radius = num(); }},
        {"phantom.seed", [&] { p.seed = u64(); }},
        {"generator.variant", [&] { g.variant = nets::parse_variant(str()); }},
        {"generator.depth", [&] { g.depth = uint(); }},
        {"generator.base_channels", [&] { g.base_channels = uint(); }},
        {"generator.channel_cap", [&] { g.channel_cap = uint(); }},
        {"generator.dropout_p", [&] { g.dropout_p = num(); }},
        {"generator.noise_mode", [&] { g.noise_mode = nets::parse_noise_mode(str()); }},
        {"generator.n_stacks", [&] { g.n_stacks = uint(); }},
        {"discriminator.n_down", [&] { d.n_down = uint(); }},
        {"discriminator.base_channels", [&] { d.base_channels = uint(); }},
        {"loss.a", [&] { t.weights.a = num(); }},
        {"loss.b", [&] { t.weights.b = num(); }},
        {"loss.rec_mode", [&] { t.weights.rec_mode = losses::parse_rec_mode(str()); }},
        {"loss.l1_share", [&] { t.weights.l1_share = num(); }},
        {"train.epochs", [&] { t.epochs = uint(); }},
        {"train.batch_size", [&] { t.batch_size = uint(); }},
        {"train.lr", [&] { t.adam.lr = num(); }},
        {"train.beta1", [&] { t.adam.beta1 = num(); }},
        {"train.beta2", [&] { t.adam.beta2 = num(); }},
        {"train.eps", [&] { t.adam.eps = num(); }},
        {"train.d_steps_per_g", [&] { t.d_steps_per_g = uint(); }},
        {"train.seed", [&] { t.seed = u64(); }},
        {"train.eval_every", [&] { t.eval_every = uint(); }},
        {"train.augment_rotations", [&] { t.augment_rotations = uint(); }},
        {"train.augment_scales",
         [&] {
             if (v.kind != Value::Kind::array) {
                 throw ConfigError(v.where + ": train.augment_scales expects an array like [0.9, 1.1]");
             }
             t.augment_scales.clear();
             for (const auto& item : v.items) {
                 t.augment_scales.push_back(detail::to_double(item, v.where, full));
             }
         }},
        {"output.dir", [&] { cfg.output.dir = str(); }},
        {"output.pixel_spacing", [&] { cfg.output.pixel_spacing = num(); }},
        {"output.save_checkpoint", [&] { cfg.output.save_checkpoint = boolean(); }},
        {"output.overlays", [&] { cfg.output.overlays = boolean(); }},
        {"experiment.kind", [&] { cfg.experiment.kind = parse_experiment_kind(str()); }},
        {"experiment.save_checkpoints", [&] { cfg.experiment.save_checkpoints = boolean(); }},
        {"experiment.seeds",
         [&] {
             cfg.experiment.seeds.clear();
             if (v.kind == Value::Kind::array) {
                 for (const auto& item : v.items) {
                     cfg.experiment.seeds.push_back(detail::to_uint(item, v.where, full));
                 }
             } else {
                 std::stringstream ss(v.text);
                 std::string item;
                 while (std::getline(ss, item, ',')) {
                     cfg.experiment.seeds.push_back(detail::to_uint(detail::trim(item), v.where, full));
                 }
             }
         }},
    };
    const auto it = table.find(full);
    if (it == table.end()) {
        throw ConfigError(v.where + ": unknown config key '" + full + "'");
    }
    wrap(it->second);
}

/// "section.key=value" as given to --set.
inline void apply_override(RunConfig& cfg, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        throw ConfigError("--set expects section.key=value, got '" + assignment + "'");
    }
    const std::string section = detail::trim(assignment.substr(0, dot));
    const std::string key = detail::trim(assignment.substr(dot + 1, eq - dot - 1));
    apply_key(cfg, section, key, detail::parse_value(assignment.substr(eq + 1), "--set " + section + "." + key));
}

inline RunConfig config_from_text(const std::string& text, const std::string& name,
                                  const std::vector<std::string>& overrides = {})
{
    RunConfig cfg;
    for (const Entry& e : parse_config_text(text, name)) {
        apply_key(cfg, e.section, e.key, e.value);
    }
    for (const auto& o : overrides) {
        apply_override(cfg, o);
    }
    cfg.finalize();
    return cfg;
}

inline RunConfig load_config(const fs::path& path, const std::vector<std::string>& overrides = {})
{
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open config file " + path.string());
    }
    std::stringstream ss;
    ss << is.rdbuf();
    return config_from_text(ss.str(), path.string(), overrides);
}

/// Defaults plus overrides, for commands run without a config file.
inline RunConfig default_config(const std::vector<std::string>& overrides = {})
{
    return config_from_text("", "<defaults>", overrides);
}

// ---------------------------------------------------------------------------
// Canonical form, hashing, output paths

inline nlohmann::json to_json(const RunConfig& c)
{
    const auto& t = c.train;
    return {
        {"data",
         {{"dir", c.data.dir}, {"n_train", c.data.n_train}, {"n_val", c.data.n_val}, {"n_test", c.data.n_test}}},
        {"phantom", phantom::spec_to_json(c.phantom)},
        {"generator", nets::to_json(c.generator)},
        {"discriminator", nets::to_json(c.discriminator)},
        {"loss",
         {{"a", t.weights.a},
          {"b", t.weights.b},
          {"rec_mode", losses::to_string(t.weights.rec_mode)},
          {"l1_share", t.weights.l1_share}}},
        {"train",
         {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"lr", t.adam.lr},
          {"beta1", t.adam.beta1},
          {"beta2", t.adam.beta2},
          {"eps", t.adam.eps},
          {"d_steps_per_g", t.d_steps_per_g},
          {"seed", t.seed},
          {"eval_every", t.eval_every},
          {"augment_rotations", t.augment_rotations},
          {"augment_scales", t.augment_scales}}},
        {"output",
         {{"dir", c.output.dir},
          {"pixel_spacing", c.output.pixel_spacing},
          {"save_checkpoint", c.output.save_checkpoint},
          {"overlays", c.output.overlays}}},
        {"experiment",
         {{"kind", to_string(c.experiment.kind)},
          {"seeds", c.experiment.seeds},
          {"save_checkpoints", c.experiment.save_checkpoints}}},
    };
}

/// Rebuilds a RunConfig from its canonical JSON form (as stored in checkpoints).
inline RunConfig config_from_json(const nlohmann::json& j)
{
    RunConfig cfg;
    for (const auto& [section, body] : j.items()) {
        for (const auto& [key, value] : body.items()) {
            Value v;
            v.where = "checkpoint config";
            if (value.is_array()) {
                v.kind = Value::Kind::array;
                for (const auto& item : value) {
                    v.items.push_back(item.is_string() ? item.get<std::string>() : item.dump());
                }
            } else if (value.is_string()) {
                v.kind = Value::Kind::string;
                v.text = value.get<std::string>();
            } else {
                v.text = value.dump();
            }
            if (section == "generator" && (key == "image_size" || key == "in_channels" || key == "out_channels")) {
                continue;
            }
            if (section == "discriminator" && key != "n_down" && key != "base_channels") {
                continue;
            }
            apply_key(cfg, section, key, v);
        }
    }
    cfg.finalize();
    return cfg;
}

inline std::string hex64(std::uint64_t h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// FNV-1a over the canonical JSON text.
inline std::string config_hash(const RunConfig& c) { return hex64(ivgan::detail::fnv1a64(to_json(c).dump())); }

/// Relative paths resolve against $IVGAN_OUTPUT_ROOT when it is set.
inline fs::path resolve_output(const fs::path& p)
{
    if (p.is_absolute()) {
        return p;
    }
    if (const char* root = std::getenv(kOutputRootEnv); root != nullptr && *root != '\0') {
        return fs::path(root) / p;
    }
    return p;
}

/// Dataset per [data]: read from disk when data.dir is set, else generated.
inline phantom::Dataset load_dataset(const RunConfig& cfg)
{
    if (!cfg.data.dir.empty()) {
        phantom::Dataset d = phantom::read_dataset(cfg.data.dir);
        if (d.spec.image_size != cfg.phantom.image_size) {
            throw ConfigError("dataset at " + cfg.data.dir + " has image_size " + std::to_string(d.spec.image_size) +
                              " but the config expects " + std::to_string(cfg.phantom.image_size));
        }
        return d;
    }
    return phantom::make_dataset(cfg.phantom, cfg.data.n_train, cfg.data.n_val, cfg.data.n_test);
}

}  // namespace ivgan::harness
