#pragma once

// Subcommand bodies for the ivgan CLI. Each returns a process exit code;
// exceptions escape to `guarded`, which maps them onto the exit-code table.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ivgan/harness/config.hpp"
#include "ivgan/harness/experiment.hpp"
#include "ivgan/harness/report.hpp"
#include "ivgan/harness/run.hpp"
#include "ivgan/phantom/dataset_io.hpp"
#include "ivgan/segment/svg.hpp"
#include "ivgan/selftest/suites.hpp"

namespace ivgan::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitAcceptance = 3;

/// Runs `body`, reporting any exception on `err` and translating it to an
/// exit code: configuration and usage problems give 1, everything else 2.
inline int guarded(const std::function<int()>& body, std::ostream& err = std::cerr)
{
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

// ---------------------------------------------------------------------------
// gen-data

inline int cmd_gen_data(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log)
{
    const phantom::Dataset d = phantom::make_dataset(cfg.phantom, cfg.data.n_train, cfg.data.n_val, cfg.data.n_test);
    phantom::write_dataset(out_dir, d);
    log << "wrote " << d.train.size() << " train, " << d.val.size() << " val, " << d.test.size()
        << " test samples to " << out_dir.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

inline int cmd_train(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log)
{
    const phantom::Dataset data = load_dataset(cfg);
    const RunResult r = run_training(cfg, data, out_dir, cfg.output.save_checkpoint, nullptr, &log);
    log << "trained " << r.param_count << "-parameter generator for " << r.history.records.size()
        << " epochs; outputs in " << out_dir.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

inline constexpr const char* kEvalMetricsColumns = "split,index,lu_jm,ma_jm,lu_pad,ma_pad,lu_hd,ma_hd,lu_ad,ma_ad";
inline constexpr const char* kEvalSummaryColumns = "metric,mean,stddev,count,misses";

struct EvalOptions {
    fs::path checkpoint;
    std::string split = "test";
    std::optional<std::string> data_dir;  // overrides the dataset recorded with the checkpoint
    std::optional<double> pixel_spacing;
    bool overlays = true;
};

inline const std::vector<phantom::Sample>& split_samples(const phantom::Dataset& d, const std::string& split)
{
    if (split == "train") {
        return d.train;
    }
    if (split == "val") {
        return d.val;
    }
    if (split == "test") {
        return d.test;
    }
    throw ConfigError("unknown split '" + split + "' (expected train, val or test)");
}

inline std::string eval_metrics_csv(const std::string& split, const std::vector<phantom::Sample>& samples,
                                    const std::vector<metrics::MetricsRecord>& records)
{
    std::ostringstream os;
    os << kEvalMetricsColumns << '\n';
    for (std::size_t i = 0; i < records.size(); ++i) {
        os << split << ',' << samples[i].index;
        for (double v : metrics::as_array(records[i])) {
            os << ',' << (std::isnan(v) ? std::string() : train::format_number(v));
        }
        os << '\n';
    }
    return os.str();
}

inline std::string eval_summary_csv(const metrics::MetricsSummary& s)
{
    std::ostringstream os;
    os << kEvalSummaryColumns << '\n';
    for (std::size_t m = 0; m < 8; ++m) {
        const bool distance = m >= 4;
        const std::size_t misses = !distance ? 0 : (m % 2 == 0 ? s.lu_misses : s.ma_misses);
        os << metrics::kMetricNames[m] << ',' << train::format_number(s.mean[m]) << ','
           << train::format_number(s.stddev[m]) << ',' << s.count - misses << ',' << misses << '\n';
    }
    return os.str();
}

inline int cmd_eval(const EvalOptions& opt, const fs::path& out_dir, std::ostream& log)
{
    if (!fs::exists(opt.checkpoint)) {
        throw IoError("checkpoint not found: " + opt.checkpoint.string());
    }
    const auto stored = nets::read_checkpoint<float>(opt.checkpoint);
    if (!stored.config.contains("extra") || !stored.config["extra"].contains("run")) {
        throw ConfigError("checkpoint " + opt.checkpoint.string() + " does not record its training config");
    }
    RunConfig cfg = config_from_json(stored.config["extra"]["run"]);
    if (opt.data_dir) {
        cfg.data.dir = *opt.data_dir;
    }
    if (opt.pixel_spacing) {
        cfg.output.pixel_spacing = *opt.pixel_spacing;
    }
    cfg.finalize();
    const Model model = nets::load_checkpoint<float>(opt.checkpoint);
    const phantom::Dataset data = load_dataset(cfg);
    const auto& samples = split_samples(data, opt.split);
    const train::Evaluation ev = train::evaluate(*model.generator, samples, cfg.train.batch_size,
                                                 Rng(cfg.train.seed).fork("test.noise"),
                                                 metrics::Calibration{cfg.output.pixel_spacing});
    fs::create_directories(out_dir);
    write_text(out_dir / "metrics.csv", eval_metrics_csv(opt.split, samples, ev.records));
    write_text(out_dir / "summary.csv", eval_summary_csv(ev.summary));
    if (opt.overlays) {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            segment::OverlayContours c;
            c.true_lu = samples[i].lu_contour;
            c.true_ma = samples[i].ma_contour;
            const LabelMask& pred = ev.predictions[i];
            try {
                c.pred_lu = segment::extract_contour(segment::cleanup(segment::binarize(pred, segment::Region::lumen)));
            } catch (const RegionError&) {
            }
            try {
                c.pred_ma = segment::extract_contour(
                    segment::cleanup(segment::binarize(pred, segment::Region::lumen_plus_plaque)));
            } catch (const RegionError&) {
            }
            char name[64];
            std::snprintf(name, sizeof name, "%s_%04llu.svg", opt.split.c_str(),
                          static_cast<unsigned long long>(samples[i].index));
            segment::write_overlay_svg(out_dir / "overlays" / name, samples[i].condition, c);
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: %zu samples, LU-JM %.4f, MA-JM %.4f", opt.split.c_str(), samples.size(),
                  ev.summary.mean[0], ev.summary.mean[1]);
    log << buf << "; outputs in " << out_dir.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// experiment

inline int cmd_experiment(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log)
{
    const ExperimentResult r = run_experiment(cfg, out_dir, &log);
    log << to_string(cfg.experiment.kind) << ": " << r.rows.size() << " runs, " << r.failures
        << " failed; reports in " << out_dir.string() << '\n';
    return r.failures == 0 ? kExitOk : kExitRuntime;
}

// ---------------------------------------------------------------------------
// report

inline int cmd_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir, std::ostream& log)
{
    const ReportOutput r = build_report(run_dirs, out_dir);
    for (const auto& w : r.merge.warnings) {
        log << "warning: " << w << '\n';
    }
    log << "merged " << r.merge.merged.rows.size() << " rows from " << run_dirs.size() << " run directories, "
        << r.plots.size() << " plots; outputs in " << out_dir.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// selftest

struct SelftestOptions {
    std::vector<std::string> suites;  // empty: all
    bool force_fail = false;          // appends a check that always fails
};

inline int cmd_selftest(const SelftestOptions& opt, std::ostream& out)
{
    for (const auto& name : opt.suites) {
        bool known = false;
        for (const auto& s : selftest::suites()) {
            known = known || s.name == name;
        }
        if (!known) {
            throw ConfigError("unknown selftest suite '" + name + "'");
        }
    }
    std::size_t failed = 0, total = 0;
    const auto print = [&](const selftest::CheckResult& r) {
        ++total;
        failed += r.passed ? 0 : 1;
        char time[32];
        std::snprintf(time, sizeof time, "%.2fs", r.seconds);
        out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " [" << time << "]\n" << std::flush;
    };
    for (const auto& s : selftest::suites()) {
        if (!opt.suites.empty() && std::find(opt.suites.begin(), opt.suites.end(), s.name) == opt.suites.end()) {
            continue;
        }
        for (const auto& r : s.run()) {
            print(r);
        }
    }
    if (opt.force_fail) {
        print({"forced/failure", false, "injected by --force-fail", 0.0});
    }
    out << (total - failed) << "/" << total << " checks passed\n";
    return failed == 0 ? kExitOk : kExitAcceptance;
}

}  // namespace ivgan::harness
