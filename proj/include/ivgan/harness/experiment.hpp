#pragma once

// Experiment grids and their reports.
//
// Outputs (all CSVs have a header row and fixed column order):
//   runs.csv         one row per (configuration, seed)
//   report.csv       one row per configuration: mean test metrics + model size
//   comparison.csv   measured vs published values, one row per cell
//   report.md        the same content as markdown tables
//   provenance.json  config hash, seed list, build version, resolved config
//   runs/<config>_seed<k>/history.csv (+ checkpoint.ivck when requested)

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ivgan/harness/config.hpp"
#include "ivgan/harness/reference.hpp"
#include "ivgan/harness/run.hpp"
#include "ivgan/metrics/metrics.hpp"
#include "ivgan/train/train.hpp"

namespace ivgan::harness {

struct Setting {
    std::string label;
    std::string reference_column;  // column in the published table
    std::function<void(RunConfig&)> apply;
};

inline constexpr double kBetaGrid[] = {1, 2, 4, 8, 16, 32, 64, 128};
inline constexpr double kDefaultB = 100.0;

inline int reference_table_number(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::loss_ablation:
        return 1;
    case ExperimentKind::beta_sweep_l1:
        return 2;
    case ExperimentKind::beta_sweep_l2:
        return 3;
    case ExperimentKind::generator_comparison:
        return 4;
    }
    return 0;
}

inline std::vector<Setting> experiment_settings(ExperimentKind kind)
{
    using losses::RecMode;
    using nets::GeneratorVariant;
    const auto weights = [](double a, double b, RecMode m) {
        return [=](RunConfig& c) {
            c.train.weights.a = a;
            c.train.weights.b = b;
            c.train.weights.rec_mode = m;
        };
    };
    switch (kind) {
    case ExperimentKind::loss_ablation:
        return {{"adversarial_only", "Counter loss", weights(1, 0, RecMode::l1)},
                {"l1_only", "L1 loss", weights(0, kDefaultB, RecMode::l1)},
                {"l2_only", "L2 loss", weights(0, kDefaultB, RecMode::l2)},
                {"adversarial_l1", "Confrontations and L1 losses", weights(1, kDefaultB, RecMode::l1)},
                {"adversarial_l2", "Confrontation and L2 loss", weights(1, kDefaultB, RecMode::l2)}};
    case ExperimentKind::beta_sweep_l1:
    case ExperimentKind::beta_sweep_l2: {
        const RecMode mode = kind == ExperimentKind::beta_sweep_l1 ? RecMode::l1 : RecMode::l2;
        std::vector<Setting> out;
        for (double b : kBetaGrid) {
            const std::string label = std::to_string(static_cast<int>(b));
            out.push_back({label, label, weights(1, b, mode)});
        }
        return out;
    }
    case ExperimentKind::generator_comparison: {
        const auto variant = [](GeneratorVariant v) {
            return [=](RunConfig& c) {
                c.generator.variant = v;
                c.train.weights.a = 1;
                c.train.weights.b = kDefaultB;
            };
        };
        return {{"unet", "Pix2Pix-1(U-Net)", variant(GeneratorVariant::unet)},
                {"encoder_decoder", "Pix2Pix-2(E-D)", variant(GeneratorVariant::encoder_decoder)},
                {"hourglass_no_reinject", "Method 1(no inputs)", variant(GeneratorVariant::hourglass_no_reinject)},
                {"hourglass_reinject", "Method 2(within puts)", variant(GeneratorVariant::hourglass_reinject)}};
    }
    }
    return {};
}

inline constexpr const char* kRunsColumns[] = {
    "experiment", "config", "seed",  "status", "variant", "a",     "b",     "rec_mode",  "param_count",
    "model_size_m", "lu_jm", "ma_jm", "lu_pad", "ma_pad", "lu_hd", "ma_hd", "lu_ad", "ma_ad", "lu_misses",
    "ma_misses"};

struct RunRow {
    std::string experiment;
    std::string config;
    std::uint64_t seed = 0;
    std::string status = "ok";
    std::string variant;
    double a = 0, b = 0;
    std::string rec_mode;
    std::size_t param_count = 0;
    metrics::MetricsSummary test;
};

inline std::string csv_safe(std::string s)
{
    for (char& c : s) {
        if (c == ',' || c == '\n' || c == '\r' || c == '"') {
            c = ';';
        }
    }
    return s;
}

inline std::string model_size_m(std::size_t params)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", static_cast<double>(params) / 1e6);
    return buf;
}

inline std::string runs_csv(const std::vector<RunRow>& rows)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < std::size(kRunsColumns); ++i) {
        os << (i ? "," : "") << kRunsColumns[i];
    }
    os << '\n';
    for (const auto& r : rows) {
        const bool ok = r.status == "ok";
        os << r.experiment << ',' << r.config << ',' << r.seed << ',' << csv_safe(r.status) << ',' << r.variant << ','
           << train::format_number(r.a) << ',' << train::format_number(r.b) << ',' << r.rec_mode << ','
           << r.param_count << ',' << model_size_m(r.param_count);
        for (std::size_t m = 0; m < 8; ++m) {
            os << ',' << (ok ? train::format_number(r.test.mean[m]) : "");
        }
        os << ',' << (ok ? std::to_string(r.test.lu_misses) : "") << ',' << (ok ? std::to_string(r.test.ma_misses) : "")
           << '\n';
    }
    return os.str();
}

struct ConfigSummary {
    std::string config;
    std::string reference_column;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    std::array<double, 8> mean{};
    std::size_t param_count = 0;
};

inline std::vector<ConfigSummary> summarize(const std::vector<Setting>& settings, const std::vector<RunRow>& rows)
{
    std::vector<ConfigSummary> out;
    for (const auto& s : settings) {
        ConfigSummary cs;
        cs.config = s.label;
        cs.reference_column = s.reference_column;
        std::array<double, 8> sum{};
        std::array<std::size_t, 8> count{};
        for (const auto& r : rows) {
            if (r.config != s.label) {
                continue;
            }
            cs.param_count = r.param_count;
            if (r.status != "ok") {
                ++cs.n_failed;
                continue;
            }
            ++cs.n_ok;
            for (std::size_t m = 0; m < 8; ++m) {
                if (!std::isnan(r.test.mean[m])) {
                    sum[m] += r.test.mean[m];
                    ++count[m];
                }
            }
        }
        for (std::size_t m = 0; m < 8; ++m) {
            cs.mean[m] = count[m] ? sum[m] / static_cast<double>(count[m]) : std::nan("");
        }
        out.push_back(cs);
    }
    return out;
}

inline std::string report_csv(ExperimentKind kind, const std::vector<ConfigSummary>& summary)
{
    std::ostringstream os;
    os << "experiment,config,n_ok,n_failed";
    for (const char* m : metrics::kMetricNames) {
        os << ',' << m;
    }
    os << ",model_size_m\n";
    for (const auto& s : summary) {
        os << to_string(kind) << ',' << s.config << ',' << s.n_ok << ',' << s.n_failed;
        for (double v : s.mean) {
            os << ',' << train::format_number(v);
        }
        os << ',' << model_size_m(s.param_count) << '\n';
    }
    return os.str();
}

/// One row per published cell that has a measured counterpart. Deltas are
/// measured minus published and purely informational.
inline std::string comparison_csv(ExperimentKind kind, const std::vector<ConfigSummary>& summary)
{
    const ReferenceTable& table = reference_table(reference_table_number(kind));
    std::ostringstream os;
    os << "config,reference_column,metric,ours,paper,delta\n";
    for (const auto& s : summary) {
        for (std::size_t m = 0; m < 8; ++m) {
            const auto ref = table.find(kReferenceRowForMetric[m], s.reference_column);
            if (!ref) {
                continue;
            }
            const double paper = std::stod(std::string(*ref));
            os << s.config << ',' << s.reference_column << ',' << metrics::kMetricNames[m] << ','
               << train::format_number(s.mean[m]) << ',' << *ref << ',' << train::format_number(s.mean[m] - paper)
               << '\n';
        }
        if (const auto ref = table.find("Model size /M", s.reference_column)) {
            const double ours = static_cast<double>(s.param_count) / 1e6;
            os << s.config << ',' << s.reference_column << ",model_size_m," << model_size_m(s.param_count) << ','
               << *ref << ',' << train::format_number(ours - std::stod(std::string(*ref))) << '\n';
        }
    }
    return os.str();
}

inline std::string report_markdown(ExperimentKind kind, const RunConfig& cfg, const std::vector<ConfigSummary>& summary)
{
    const ReferenceTable& table = reference_table(reference_table_number(kind));
    std::ostringstream os;
    char buf[64];
    const auto fmt = [&](double v) {
        if (std::isnan(v)) {
            return std::string("n/a");
        }
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    os << "# " << to_string(kind) << "\n\n";
    os << "Config hash `" << config_hash(cfg) << "`, seeds";
    for (auto s : cfg.experiment.seeds) {
        os << ' ' << s;
    }
    os << ", " << cfg.data.n_train << " training phantoms, " << cfg.train.epochs << " epochs. "
       << "Metrics are test-split means over successful seeds, distances in pixels x "
       << cfg.output.pixel_spacing << ".\n\n";
    os << "| config | n_ok |";
    for (const char* m : metrics::kMetricNames) {
        os << ' ' << m << " |";
    }
    os << " model size (M) |\n|---|---|";
    for (std::size_t m = 0; m < 9; ++m) {
        os << "---|";
    }
    os << '\n';
    for (const auto& s : summary) {
        os << "| " << s.config << " | " << s.n_ok << " |";
        for (double v : s.mean) {
            os << ' ' << fmt(v) << " |";
        }
        os << ' ' << model_size_m(s.param_count) << " |\n";
    }
    os << "\n## Published reference (Table " << table.number << ", " << table.title
       << ")\n\nReported for orientation only; the published numbers come from clinical data and "
          "are not expected to be reproduced by phantom experiments.\n\n| config | metric | ours | published |\n"
          "|---|---|---|---|\n";
    for (const auto& s : summary) {
        for (std::size_t m = 0; m < 8; ++m) {
            if (const auto ref = table.find(kReferenceRowForMetric[m], s.reference_column)) {
                os << "| " << s.config << " | " << kReferenceRowForMetric[m] << " | " << fmt(s.mean[m]) << " | "
                   << *ref << " |\n";
            }
        }
        if (const auto ref = table.find("Model size /M", s.reference_column)) {
            os << "| " << s.config << " | Model size /M | " << model_size_m(s.param_count) << " | " << *ref << " |\n";
        }
    }
    return os.str();
}

struct ExperimentResult {
    std::vector<RunRow> rows;
    std::vector<ConfigSummary> summary;
    std::size_t failures = 0;
};

/// Runs every (setting, seed) pair. A failing run is recorded and the grid
/// continues.
inline ExperimentResult run_experiment(const RunConfig& base, const fs::path& out_dir, std::ostream* log = nullptr)
{
    const ExperimentKind kind = base.experiment.kind;
    const std::vector<Setting> settings = experiment_settings(kind);
    const phantom::Dataset data = load_dataset(base);
    const metrics::Calibration cal{base.output.pixel_spacing};
    ExperimentResult result;
    for (const auto& setting : settings) {
        for (std::uint64_t seed : base.experiment.seeds) {
            RunRow row;
            row.experiment = to_string(kind);
            row.config = setting.label;
            row.seed = seed;
            try {
                RunConfig cfg = base;
                setting.apply(cfg);
                cfg.train.seed = seed;
                cfg.finalize();
                row.variant = nets::to_string(cfg.generator.variant);
                row.a = cfg.train.weights.a;
                row.b = cfg.train.weights.b;
                row.rec_mode = losses::to_string(cfg.train.weights.rec_mode);
                if (log) {
                    *log << "[" << row.experiment << "] " << row.config << " seed " << seed << '\n' << std::flush;
                }
                Model model;
                const fs::path run_dir = out_dir / "runs" / (setting.label + "_seed" + std::to_string(seed));
                const RunResult rr = run_training(cfg, data, run_dir, base.experiment.save_checkpoints, &model, log);
                row.param_count = rr.param_count;
                const train::Evaluation ev = train::evaluate(*model.generator, data.test, cfg.train.batch_size,
                                                             Rng(seed).fork("test.noise"), cal);
                row.test = ev.summary;
            } catch (const std::exception& e) {
                row.status = std::string("failed: ") + e.what();
                ++result.failures;
                if (log) {
                    *log << "  run failed: " << e.what() << '\n';
                }
            }
            result.rows.push_back(row);
        }
    }
    result.summary = summarize(settings, result.rows);
    fs::create_directories(out_dir);
    write_text(out_dir / "runs.csv", runs_csv(result.rows));
    write_text(out_dir / "report.csv", report_csv(kind, result.summary));
    write_text(out_dir / "comparison.csv", comparison_csv(kind, result.summary));
    write_text(out_dir / "report.md", report_markdown(kind, base, result.summary));
    write_text(out_dir / "provenance.json",
               provenance(base, base.experiment.seeds, std::string("experiment ") + to_string(kind)).dump(2) + "\n");
    return result;
}

}  // namespace ivgan::harness
