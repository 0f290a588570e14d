#pragma once

// Checkpoint file layout (little-endian):
//
//   "IVCK"  u32 version  u64 json_length  json_bytes
//   u32 tensor_count
//   tensor_count x { u32 name_length  name_bytes  IVT1 tensor }
//
// The JSON echoes the generator and discriminator configs. Tensor names are
// the network parameter/buffer names prefixed with "generator/" or
// "discriminator/".

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ivgan/diffcore/serialize.hpp"
#include "ivgan/error.hpp"
#include "ivgan/nets/discriminator.hpp"
#include "ivgan/nets/generator.hpp"

namespace ivgan::nets {

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json to_json(const GeneratorConfig& c)
{
    return {{"variant", to_string(c.variant)},
            {"image_size", c.image_size},
            {"depth", c.resolved_depth()},
            {"base_channels", c.base_channels},
            {"channel_cap", c.resolved_cap()},
            {"dropout_p", c.dropout_p},
            {"noise_mode", to_string(c.noise_mode)},
            {"n_stacks", c.n_stacks},
            {"in_channels", c.in_channels},
            {"out_channels", c.out_channels}};
}

inline GeneratorConfig generator_config_from_json(const nlohmann::json& j)
{
    GeneratorConfig c;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.image_size = j.at("image_size").get<std::size_t>();
    c.depth = j.at("depth").get<std::size_t>();
    c.base_channels = j.at("base_channels").get<std::size_t>();
    c.channel_cap = j.at("channel_cap").get<std::size_t>();
    c.dropout_p = j.at("dropout_p").get<double>();
    c.noise_mode = parse_noise_mode(j.at("noise_mode").get<std::string>());
    c.n_stacks = j.at("n_stacks").get<std::size_t>();
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.out_channels = j.at("out_channels").get<std::size_t>();
    c.validate();
    return c;
}

inline nlohmann::json to_json(const DiscriminatorConfig& c)
{
    return {{"image_size", c.image_size},
            {"n_down", c.n_down},
            {"base_channels", c.base_channels},
            {"condition_channels", c.condition_channels},
            {"candidate_channels", c.candidate_channels}};
}

inline DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j)
{
    DiscriminatorConfig c;
    c.image_size = j.at("image_size").get<std::size_t>();
    c.n_down = j.at("n_down").get<std::size_t>();
    c.base_channels = j.at("base_channels").get<std::size_t>();
    c.condition_channels = j.at("condition_channels").get<std::size_t>();
    c.candidate_channels = j.at("candidate_channels").get<std::size_t>();
    c.validate();
    return c;
}

/// Names the first field where two config objects differ, or "" when equal.
inline std::string first_difference(const nlohmann::json& stored, const nlohmann::json& expected,
                                    const std::string& prefix)
{
    for (const auto& [key, value] : expected.items()) {
        if (!stored.contains(key)) {
            return prefix + "." + key + " (missing from checkpoint)";
        }
        if (stored.at(key) != value) {
            return prefix + "." + key + " (checkpoint " + stored.at(key).dump() + ", expected " + value.dump() + ")";
        }
    }
    for (const auto& [key, value] : stored.items()) {
        if (!expected.contains(key)) {
            return prefix + "." + key + " (unexpected field)";
        }
    }
    return {};
}

/// Fully parsed checkpoint contents. Reading validates the whole file before
/// anything is handed to a network.
template <class T>
struct CheckpointData {
    nlohmann::json config;
    std::map<std::string, Tensor<T>> tensors;
};

template <class T>
void write_checkpoint(const std::filesystem::path& path, const nlohmann::json& config,
                      const std::vector<std::pair<std::string, Tensor<T>>>& tensors)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw IoError("cannot open checkpoint for writing: " + path.string());
    }
    os.write("IVCK", 4);
    io::write_pod(os, kCheckpointVersion);
    const std::string text = config.dump();
    io::write_pod(os, static_cast<std::uint64_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    io::write_pod(os, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        io::write_pod(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_tensor(os, t);
    }
    if (!os) {
        throw IoError("failed writing checkpoint " + path.string());
    }
}

template <class T>
CheckpointData<T> read_checkpoint(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open checkpoint: " + path.string());
    }
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != "IVCK") {
        throw IoError("not a checkpoint file (bad magic): " + path.string());
    }
    const auto version = io::read_pod<std::uint32_t>(is, "checkpoint version");
    if (version != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    const auto json_len = io::read_pod<std::uint64_t>(is, "checkpoint config length");
    if (json_len > (std::uint64_t{1} << 24)) {
        throw IoError("implausible checkpoint config length");
    }
    std::string text(static_cast<std::size_t>(json_len), '\0');
    if (!is.read(text.data(), static_cast<std::streamsize>(text.size()))) {
        throw IoError("truncated checkpoint while reading config");
    }
    CheckpointData<T> data;
    try {
        data.config = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("corrupt checkpoint config: ") + e.what());
    }
    const auto count = io::read_pod<std::uint32_t>(is, "checkpoint tensor count");
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = io::read_pod<std::uint32_t>(is, "tensor name length");
        if (len == 0 || len > 4096) {
            throw IoError("implausible tensor name length in checkpoint");
        }
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) {
            throw IoError("truncated checkpoint while reading tensor name");
        }
        Tensor<T> t = read_tensor<T>(is);
        if (!data.tensors.emplace(name, t).second) {
            throw IoError("duplicate tensor '" + name + "' in checkpoint");
        }
    }
    if (is.peek() != std::char_traits<char>::eof()) {
        throw IoError("trailing bytes after checkpoint tensors");
    }
    return data;
}

template <class T>
struct GanModel {
    std::unique_ptr<Generator<T>> generator;
    std::unique_ptr<Discriminator<T>> discriminator;
};

template <class T>
nlohmann::json model_config(const GanModel<T>& m)
{
    return {{"generator", to_json(m.generator->config())}, {"discriminator", to_json(m.discriminator->config())}};
}

namespace detail {

template <class T>
void collect(const std::string& prefix, const Network<T>& net, std::vector<std::pair<std::string, Tensor<T>>>& out)
{
    for (const auto& p : net.parameters()) {
        out.emplace_back(prefix + p.name, p.tensor);
    }
    for (const auto& b : net.buffers()) {
        out.emplace_back(prefix + b.name, b.tensor);
    }
}

}  // namespace detail

template <class T>
std::vector<std::pair<std::string, Tensor<T>>> named_state(const GanModel<T>& m)
{
    std::vector<std::pair<std::string, Tensor<T>>> out;
    detail::collect("generator/", *m.generator, out);
    detail::collect("discriminator/", *m.discriminator, out);
    return out;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const GanModel<T>& m, nlohmann::json extra = {})
{
    nlohmann::json cfg = model_config(m);
    if (!extra.is_null()) {
        cfg["extra"] = std::move(extra);
    }
    write_checkpoint(path, cfg, named_state(m));
}

/// Copies checkpoint tensors into an existing model after checking that the
/// stored configs equal the model's configs and that every tensor is present
/// with a matching shape. Nothing is modified unless all checks pass.
template <class T>
void load_state(const CheckpointData<T>& data, GanModel<T>& m)
{
    const nlohmann::json expected = model_config(m);
    for (const char* part : {"generator", "discriminator"}) {
        if (!data.config.contains(part)) {
            throw ConfigError(std::string("checkpoint lacks a ") + part + " config");
        }
        const std::string diff = first_difference(data.config.at(part), expected.at(part), part);
        if (!diff.empty()) {
            throw ConfigError("checkpoint config mismatch: " + diff);
        }
    }
    auto state = named_state(m);
    if (state.size() != data.tensors.size()) {
        throw ConfigError("checkpoint holds " + std::to_string(data.tensors.size()) + " tensors, model expects " +
                          std::to_string(state.size()));
    }
    for (const auto& [name, t] : state) {
        auto it = data.tensors.find(name);
        if (it == data.tensors.end()) {
            throw ConfigError("checkpoint is missing tensor '" + name + "'");
        }
        if (it->second.shape() != t.shape()) {
            throw ConfigError("checkpoint tensor '" + name + "' has shape " + shape_str(it->second.shape()) +
                              ", model expects " + shape_str(t.shape()));
        }
    }
    for (auto& [name, t] : state) {
        const auto src = data.tensors.at(name).data();
        auto dst = t.mutable_data();
        std::copy(src.begin(), src.end(), dst.begin());
    }
}

template <class T>
GanModel<T> build_model(const GeneratorConfig& g, const DiscriminatorConfig& d, const Rng& rng)
{
    GanModel<T> m;
    m.generator = std::make_unique<Generator<T>>(g, rng);
    m.discriminator = std::make_unique<Discriminator<T>>(d, rng);
    return m;
}

/// Rebuilds both networks from the configs stored in the checkpoint.
template <class T>
GanModel<T> load_checkpoint(const std::filesystem::path& path)
{
    const CheckpointData<T> data = read_checkpoint<T>(path);
    if (!data.config.contains("generator") || !data.config.contains("discriminator")) {
        throw ConfigError("checkpoint config lacks generator/discriminator sections");
    }
    GanModel<T> m;
    try {
        m = build_model<T>(generator_config_from_json(data.config.at("generator")),
                           discriminator_config_from_json(data.config.at("discriminator")), Rng(0));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint config is malformed: ") + e.what());
    }
    load_state(data, m);
    return m;
}

}  // namespace ivgan::nets
