#pragma once

// A single training run: build the model from a RunConfig, train, and write
// the declared outputs. Shared by the train and experiment commands.

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "ivgan/harness/config.hpp"
#include "ivgan/nets/checkpoint.hpp"
#include "ivgan/train/train.hpp"

namespace ivgan::harness {

using Model = nets::GanModel<float>;

inline Model build_model(const RunConfig& cfg)
{
    return nets::build_model<float>(cfg.generator, cfg.discriminator, Rng(cfg.train.seed).fork("init"));
}

inline void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw IoError("cannot write " + path.string());
    }
    os << text;
    if (!os) {
        throw IoError("failed writing " + path.string());
    }
}

inline std::string read_text(const fs::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline nlohmann::json provenance(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                 const std::string& command)
{
    return {{"command", command},
            {"config_hash", config_hash(cfg)},
            {"seeds", seeds},
            {"build_version", kBuildVersion},
            {"config", to_json(cfg)}};
}

/// The config sections that influence training results; output locations
/// are left out so relocating a run does not change its checkpoint bytes.
inline nlohmann::json training_json(const RunConfig& cfg)
{
    nlohmann::json j = to_json(cfg);
    j.erase("output");
    j.erase("experiment");
    return j;
}

inline std::string history_csv(const train::History& h)
{
    std::ostringstream os;
    train::write_history_csv(os, h);
    return os.str();
}

/// Logs one line per epoch to `log` (usually std::cerr).
inline train::EpochCallback epoch_logger(std::ostream* log, std::string tag)
{
    if (log == nullptr) {
        return {};
    }
    return [log, tag = std::move(tag)](const train::EpochRecord& r) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s epoch %zu  d_loss %.4f  g_adv %.4f  g_rec %.4f", tag.c_str(), r.epoch,
                      r.d_loss, r.g_adv, r.g_rec);
        *log << buf;
        if (r.evaluated) {
            std::snprintf(buf, sizeof buf, "  val lu_jm %.4f  ma_jm %.4f", r.validation.mean[0], r.validation.mean[1]);
            *log << buf;
        }
        *log << '\n' << std::flush;
    };
}

struct RunResult {
    train::History history;
    std::size_t param_count = 0;
};

/// Trains per `cfg` on the dataset's train split, validating on its val split.
/// Writes history.csv, config.json, provenance.json and (optionally)
/// checkpoint.ivck into `out_dir`. Output bytes depend only on the inputs.
inline RunResult run_training(const RunConfig& cfg, const phantom::Dataset& data, const fs::path& out_dir,
                              bool save_checkpoint, Model* model_out = nullptr, std::ostream* log = nullptr)
{
    Model model = build_model(cfg);
    RunResult result;
    result.param_count = model.generator->param_count();
    result.history = train::train(model, data.train, data.val, cfg.train, epoch_logger(log, out_dir.filename().string()));
    fs::create_directories(out_dir);
    write_text(out_dir / "history.csv", history_csv(result.history));
    write_text(out_dir / "config.json", to_json(cfg).dump(2) + "\n");
    write_text(out_dir / "provenance.json", provenance(cfg, {cfg.train.seed}, "train").dump(2) + "\n");
    if (save_checkpoint) {
        nets::save_checkpoint(out_dir / "checkpoint.ivck", model, nlohmann::json{{"run", training_json(cfg)}});
    }
    if (model_out != nullptr) {
        *model_out = std::move(model);
    }
    return result;
}

}  // namespace ivgan::harness
