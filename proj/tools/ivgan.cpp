// ivgan command-line interface.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ivgan/harness/commands.hpp"

namespace {

using namespace ivgan::harness;

/// Options shared by every config-driven subcommand. Each convenience flag is
/// an alias for a `--set section.key=value` override and wins over the file.
struct ConfigFlags {
    std::string config;
    std::vector<std::string> sets;
    std::string out;
    std::vector<std::pair<std::string, std::string>> aliases;  // (section.key, value)

    void attach(CLI::App* cmd, bool training_flags)
    {
        cmd->add_option("--config,-c", config, "Config file (TOML-style sections and key = value)");
        cmd->add_option("--set", sets, "Override a config key, e.g. --set train.epochs=5")->take_all();
        cmd->add_option("--out,-o", out, "Output directory (relative paths honour IVGAN_OUTPUT_ROOT)");
        const auto alias = [&](const std::string& flag, const std::string& key, const std::string& help) {
            cmd->add_option_function<std::string>(
                flag, [this, key](const std::string& v) { aliases.emplace_back(key, v); }, help);
        };
        alias("--n-train", "data.n_train", "Training samples");
        alias("--n-val", "data.n_val", "Validation samples");
        alias("--n-test", "data.n_test", "Test samples");
        alias("--image-size", "phantom.image_size", "Phantom image size in pixels");
        alias("--phantom-seed", "phantom.seed", "Phantom generator seed");
        if (training_flags) {
            alias("--data", "data.dir", "Dataset directory written by gen-data");
            alias("--epochs", "train.epochs", "Training epochs");
            alias("--batch-size", "train.batch_size", "Minibatch size");
            alias("--lr", "train.lr", "Adam learning rate");
            alias("--seed", "train.seed", "Training seed");
            alias("--variant", "generator.variant",
                  "Generator: unet, encoder_decoder, hourglass_no_reinject, hourglass_reinject");
            alias("--base-channels", "generator.base_channels", "Generator base width");
            alias("--a", "loss.a", "Adversarial weight");
            alias("--b", "loss.b", "Reconstruction weight");
            alias("--rec-mode", "loss.rec_mode", "Reconstruction loss: l1, l2 or l1_plus_l2");
            alias("--kind", "experiment.kind", "Experiment kind (experiment command)");
            alias("--seeds", "experiment.seeds", "Comma-separated seeds (experiment command)");
        }
    }

    RunConfig load() const
    {
        std::vector<std::string> overrides = sets;
        for (const auto& [key, value] : aliases) {
            const bool quote = key == "data.dir" || key == "generator.variant" || key == "loss.rec_mode" ||
                               key == "experiment.kind" || key == "experiment.seeds";
            overrides.push_back(key + "=" + (quote ? "\"" + value + "\"" : value));
        }
        return config.empty() ? default_config(overrides) : load_config(config, overrides);
    }

    fs::path out_dir(const RunConfig& cfg, const std::string& fallback) const
    {
        if (!out.empty()) {
            return resolve_output(out);
        }
        return resolve_output(fallback.empty() ? cfg.output.dir : fallback);
    }
};

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"ivgan: conditional-GAN IVUS border segmentation on synthetic phantoms"};
    app.set_version_flag("--version", std::string(kBuildVersion));
    app.require_subcommand(1);

    ConfigFlags gen_flags, train_flags, exp_flags;
    auto* gen = app.add_subcommand("gen-data", "Generate a phantom dataset on disk");
    gen_flags.attach(gen, false);

    auto* tr = app.add_subcommand("train", "Train a generator/discriminator pair");
    train_flags.attach(tr, true);

    EvalOptions eval_opt;
    std::string eval_out, eval_data;
    double eval_spacing = 0.0;
    bool no_overlays = false;
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    ev->add_option("--checkpoint", eval_opt.checkpoint, "Checkpoint file written by train")->required();
    ev->add_option("--split", eval_opt.split, "train, val or test")->capture_default_str();
    ev->add_option("--data", eval_data, "Dataset directory (default: regenerate the training dataset)");
    ev->add_option("--pixel-spacing", eval_spacing, "Distance units per pixel")->check(CLI::PositiveNumber);
    ev->add_flag("--no-overlays", no_overlays, "Skip SVG overlays");
    ev->add_option("--out,-o", eval_out, "Output directory (default: <checkpoint dir>/eval_<split>)");

    auto* ex = app.add_subcommand("experiment", "Run a loss, beta or generator experiment grid");
    exp_flags.attach(ex, true);

    std::vector<std::string> report_dirs;
    std::string report_out = "report";
    auto* rep = app.add_subcommand("report", "Merge experiment runs.csv files and plot them");
    rep->add_option("run_dirs", report_dirs, "Experiment output directories");
    rep->add_option("--out,-o", report_out, "Output directory")->capture_default_str();

    SelftestOptions st_opt;
    auto* st = app.add_subcommand("selftest", "Run the oracle test suites");
    st->add_option("--suite", st_opt.suites,
                   "Limit to named suites: gradients, adjoint, metric_oracles, geometry, closed_loop, "
                   "param_count, adam");
    st->add_flag("--force-fail", st_opt.force_fail, "Add a failing check (exercises the failure exit code)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (*gen) {
        return guarded([&] {
            const RunConfig cfg = gen_flags.load();
            return cmd_gen_data(cfg, gen_flags.out_dir(cfg, "data"), std::cerr);
        });
    }
    if (*tr) {
        return guarded([&] {
            const RunConfig cfg = train_flags.load();
            return cmd_train(cfg, train_flags.out_dir(cfg, ""), std::cerr);
        });
    }
    if (*ev) {
        return guarded([&] {
            if (!eval_data.empty()) {
                eval_opt.data_dir = eval_data;
            }
            if (eval_spacing > 0.0) {
                eval_opt.pixel_spacing = eval_spacing;
            }
            eval_opt.overlays = !no_overlays;
            const fs::path out = eval_out.empty() ? eval_opt.checkpoint.parent_path() / ("eval_" + eval_opt.split)
                                                  : resolve_output(eval_out);
            return cmd_eval(eval_opt, out, std::cerr);
        });
    }
    if (*ex) {
        return guarded([&] {
            const RunConfig cfg = exp_flags.load();
            return cmd_experiment(cfg, exp_flags.out_dir(cfg, ""), std::cerr);
        });
    }
    if (*rep) {
        return guarded([&] {
            std::vector<fs::path> dirs(report_dirs.begin(), report_dirs.end());
            return cmd_report(dirs, resolve_output(report_out), std::cerr);
        });
    }
    if (*st) {
        return guarded([&] { return cmd_selftest(st_opt, std::cout); });
    }
    return kExitUsage;
}
