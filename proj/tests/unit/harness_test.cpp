#include <gtest/gtest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ivgan/harness/commands.hpp"
#include "ivgan/harness/experiment.hpp"
#include "ivgan/harness/reference.hpp"
#include "ivgan/harness/report.hpp"
#include "test_util.hpp"

namespace {

namespace hn = ivgan::harness;
namespace fs = std::filesystem;
using ivgan::test::slurp;
using ivgan::test::TempDir;

/// Smallest configuration the whole pipeline accepts: 16x16 phantoms and
/// two-level networks.
const std::vector<std::string> kTinyOverrides = {
    "phantom.image_size=16",     "phantom.center_jitter=1",   "phantom.catheter_ring_radius=0",
    "generator.depth=2",         "generator.base_channels=2", "discriminator.n_down=2",
    "discriminator.base_channels=2", "data.n_train=2",        "data.n_val=1",
    "data.n_test=1",             "train.epochs=1",            "output.overlays=false"};

hn::RunConfig tiny_config(std::vector<std::string> extra = {})
{
    std::vector<std::string> all = kTinyOverrides;
    all.insert(all.end(), extra.begin(), extra.end());
    return hn::default_config(all);
}

std::string config_error(const std::string& text)
{
    try {
        hn::config_from_text(text, "test.toml");
    } catch (const ivgan::ConfigError& e) {
        return e.what();
    }
    return "<no error>";
}

TEST(Config, DefaultsValidate)
{
    const auto cfg = hn::default_config();
    EXPECT_EQ(cfg.phantom.image_size, 64u);
    EXPECT_EQ(cfg.generator.image_size, 64u);
    EXPECT_EQ(cfg.train.weights.b, 100.0);
    EXPECT_EQ(cfg.experiment.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
}

TEST(Config, ParsesSectionsCommentsAndArrays)
{
    const auto cfg = hn::config_from_text("# comment\n[train]\nepochs = 3 # trailing\naugment_scales = [0.9, 1.1]\n"
                                          "[generator]\nvariant = \"hourglass_reinject\"\n[experiment]\nseeds = [4]\n",
                                          "x.toml");
    EXPECT_EQ(cfg.train.epochs, 3u);
    EXPECT_EQ(cfg.train.augment_scales, (std::vector<double>{0.9, 1.1}));
    EXPECT_EQ(cfg.generator.variant, ivgan::nets::GeneratorVariant::hourglass_reinject);
    EXPECT_EQ(cfg.experiment.seeds, (std::vector<std::uint64_t>{4}));
}

TEST(Config, ErrorsNameFileAndLine)
{
    EXPECT_NE(config_error("[train]\nepochs =\n").find("test.toml:2"), std::string::npos);
    EXPECT_NE(config_error("[train]\n\nepochs = 2\nbogus = 1\n").find("test.toml:4"), std::string::npos);
    EXPECT_NE(config_error("[train]\n\nepochs = 2\nbogus = 1\n").find("train.bogus"), std::string::npos);
    EXPECT_NE(config_error("epochs = 1\n").find("test.toml:1"), std::string::npos);
    EXPECT_NE(config_error("[train\n").find("test.toml:1"), std::string::npos);
    EXPECT_NE(config_error("[train]\nepochs = many\n").find("test.toml:2"), std::string::npos);
}

TEST(Config, SemanticValidationRuns)
{
    EXPECT_NE(config_error("[train]\nepochs = 0\n").find("epochs"), std::string::npos);
    EXPECT_NE(config_error("[loss]\na = 0\nb = 0\n").find("both zero"), std::string::npos);
}

TEST(Config, OverridesApplyAfterFile)
{
    const auto cfg = hn::config_from_text("[train]\nepochs = 3\n", "x.toml", {"train.epochs=5", "loss.b=0"});
    EXPECT_EQ(cfg.train.epochs, 5u);
    EXPECT_EQ(cfg.train.weights.b, 0.0);
    EXPECT_THROW(hn::config_from_text("", "x.toml", {"train.epochs"}), ivgan::ConfigError);
    EXPECT_THROW(hn::config_from_text("", "x.toml", {"nope.key=1"}), ivgan::ConfigError);
}

TEST(Config, CheckedInConfigsLoad)
{
    for (const auto& e : fs::directory_iterator(IVGAN_CONFIG_DIR)) {
        if (e.path().extension() == ".toml") {
            EXPECT_NO_THROW(hn::load_config(e.path())) << e.path();
        }
    }
    EXPECT_THROW(hn::load_config(fs::path(IVGAN_CONFIG_DIR) / "missing.toml"), ivgan::IoError);
}

TEST(Config, HashIgnoresNothingSemantic)
{
    EXPECT_EQ(hn::config_hash(hn::default_config()), hn::config_hash(hn::default_config()));
    EXPECT_NE(hn::config_hash(hn::default_config()), hn::config_hash(hn::default_config({"train.seed=1"})));
}

TEST(Config, OutputRootEnvironmentOverride)
{
    ::unsetenv(hn::kOutputRootEnv);
    EXPECT_EQ(hn::resolve_output("runs/x"), fs::path("runs/x"));
    ::setenv(hn::kOutputRootEnv, "/tmp/root", 1);
    EXPECT_EQ(hn::resolve_output("runs/x"), fs::path("/tmp/root/runs/x"));
    EXPECT_EQ(hn::resolve_output("/abs/x"), fs::path("/abs/x"));
    ::unsetenv(hn::kOutputRootEnv);
}

TEST(Reference, CsvMatchesFixtureByteForByte)
{
    EXPECT_EQ(hn::reference_tables_csv(), slurp(fs::path(IVGAN_FIXTURE_DIR) / "paper_tables.csv"));
}

TEST(Reference, SpotValues)
{
    EXPECT_EQ(*hn::reference_table(1).find("LU-JM", "Confrontation and L2 loss"), "0.9206");
    EXPECT_EQ(*hn::reference_table(1).find("LU-HD/mm", "Confrontation and L2 loss"), "0.2020");
    EXPECT_EQ(*hn::reference_table(4).find("Model size /M", "Pix2Pix-1(U-Net)"), "226.4130");
    EXPECT_THROW(hn::reference_table(9), std::out_of_range);
}

TEST(Experiment, SettingCounts)
{
    EXPECT_EQ(hn::experiment_settings(hn::ExperimentKind::loss_ablation).size(), 5u);
    const auto sweep = hn::experiment_settings(hn::ExperimentKind::beta_sweep_l2);
    ASSERT_EQ(sweep.size(), 8u);
    EXPECT_EQ(sweep.front().label, "1");
    EXPECT_EQ(sweep.back().label, "128");
    EXPECT_EQ(hn::experiment_settings(hn::ExperimentKind::generator_comparison).size(), 4u);
}

TEST(Experiment, EveryReferenceColumnExists)
{
    for (auto kind : {hn::ExperimentKind::loss_ablation, hn::ExperimentKind::beta_sweep_l1,
                      hn::ExperimentKind::beta_sweep_l2, hn::ExperimentKind::generator_comparison}) {
        const auto& table = hn::reference_table(hn::reference_table_number(kind));
        for (const auto& s : hn::experiment_settings(kind)) {
            EXPECT_NE(std::find(table.columns.begin(), table.columns.end(), s.reference_column), table.columns.end())
                << s.reference_column;
        }
    }
}

TEST(Experiment, TinyLossAblationProducesFullTables)
{
    const TempDir tmp("exp_ablation");
    const auto res = hn::run_experiment(tiny_config({"experiment.seeds=[0]"}), tmp.path);
    EXPECT_EQ(res.failures, 0u);
    ASSERT_EQ(res.summary.size(), 5u);
    for (const auto& s : res.summary) {
        EXPECT_EQ(s.n_ok, 1u);
        for (double v : s.mean) {
            EXPECT_TRUE(std::isfinite(v) || std::isnan(v));
        }
    }
    const auto report = hn::parse_csv(slurp(tmp.path / "report.csv"), "report.csv");
    EXPECT_EQ(report.rows.size(), 5u);
    for (const char* m : ivgan::metrics::kMetricNames) {
        EXPECT_NO_THROW(report.column(m)) << m;
    }
    const auto runs = hn::parse_csv(slurp(tmp.path / "runs.csv"), "runs.csv");
    EXPECT_EQ(runs.rows.size(), 5u);
    EXPECT_TRUE(fs::exists(tmp.path / "comparison.csv"));
    EXPECT_TRUE(fs::exists(tmp.path / "report.md"));
}

TEST(Experiment, GeneratorComparisonModelSizes)
{
    const TempDir tmp("exp_generators");
    const auto res = hn::run_experiment(
        tiny_config({"experiment.kind=\"generator_comparison\"", "experiment.seeds=[0]"}), tmp.path);
    ASSERT_EQ(res.summary.size(), 4u);
    EXPECT_LT(res.summary[1].param_count, res.summary[0].param_count);
    EXPECT_LT(res.summary[2].param_count, res.summary[3].param_count);
    const std::string cmp = slurp(tmp.path / "comparison.csv");
    EXPECT_NE(cmp.find("model_size_m"), std::string::npos);
}

TEST(Report, SingleRunKeepsRowsAndPlots)
{
    const TempDir tmp("report_single");
    hn::run_experiment(tiny_config({"experiment.kind=\"beta_sweep_l1\"", "experiment.seeds=[0]", "train.epochs=1",
                                    "data.n_train=1"}),
                       tmp.path / "exp");
    const auto out = hn::build_report({tmp.path / "exp"}, tmp.path / "rep");
    EXPECT_TRUE(out.merge.warnings.empty());
    EXPECT_EQ(out.merge.merged.rows.size(), 8u);
    EXPECT_EQ(slurp(tmp.path / "rep" / "merged.csv"), slurp(tmp.path / "exp" / "runs.csv"));
    ASSERT_EQ(out.plots.size(), 2u);
    for (const auto& p : out.plots) {
        EXPECT_EQ(slurp(tmp.path / "rep" / "plots" / p).rfind("<svg", 0), 0u) << p;
    }
}

TEST(Report, DuplicateRunsWarnAndEmptyInputIsRejected)
{
    const std::string header = "experiment,config,seed,status,b,lu_jm,ma_jm\n";
    const auto a = hn::parse_csv(header + "loss_ablation,l1_only,0,ok,100,0.9,0.9\n", "a");
    const auto b = hn::parse_csv(header + "loss_ablation,l1_only,0,ok,100,0.8,0.8\n"
                                          "loss_ablation,l1_only,1,ok,100,0.7,0.7\n",
                                 "b");
    const auto m = hn::merge_runs({{"a", a}, {"b", b}});
    EXPECT_EQ(m.merged.rows.size(), 2u);
    ASSERT_EQ(m.warnings.size(), 1u);
    EXPECT_NE(m.warnings[0].find("duplicate"), std::string::npos);
    EXPECT_THROW(hn::merge_runs({}), ivgan::ConfigError);
    EXPECT_THROW(hn::build_report({}, "unused"), ivgan::ConfigError);
    const auto c = hn::parse_csv("experiment,config\n", "c");
    EXPECT_THROW(hn::merge_runs({{"a", a}, {"c", c}}), ivgan::Error);
}

// ---------------------------------------------------------------------------
// End-to-end through the command-line binary

int run_cli(const std::string& args, const fs::path& log)
{
    const std::string cmd = std::string(IVGAN_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, GenDataIsCompleteAndReproducible)
{
    const TempDir tmp("cli_gen");
    const std::string sizes = " --n-train 32 --n-val 8 --n-test 8";
    ASSERT_EQ(run_cli("gen-data" + sizes + " --out " + (tmp.path / "a").string(), tmp.path / "a.log"), 0)
        << slurp(tmp.path / "a.log");
    ASSERT_EQ(run_cli("gen-data" + sizes + " --out " + (tmp.path / "b").string(), tmp.path / "b.log"), 0);
    std::size_t images = 0, files = 0;
    for (const auto& e : fs::recursive_directory_iterator(tmp.path / "a")) {
        if (!e.is_regular_file()) {
            continue;
        }
        ++files;
        images += e.path().filename().string().ends_with("_image.pgm") ? 1 : 0;
        EXPECT_EQ(slurp(e.path()), slurp(tmp.path / "b" / fs::relative(e.path(), tmp.path / "a")));
    }
    EXPECT_EQ(images, 48u);
    EXPECT_EQ(files, 1u + 48u * 4u);
    EXPECT_TRUE(fs::exists(tmp.path / "a" / "manifest.json"));
}

TEST(Cli, CorruptConfigIsUsageErrorWithLineNumber)
{
    const TempDir tmp("cli_badcfg");
    std::ofstream(tmp.path / "bad.toml") << "[train]\nepochs = \n";
    EXPECT_EQ(run_cli("train --config " + (tmp.path / "bad.toml").string(), tmp.path / "log"), 1);
    EXPECT_NE(slurp(tmp.path / "log").find("bad.toml:2"), std::string::npos) << slurp(tmp.path / "log");
}

TEST(Cli, UsageErrors)
{
    const TempDir tmp("cli_usage");
    EXPECT_EQ(run_cli("frobnicate", tmp.path / "log"), 1);
    EXPECT_EQ(run_cli("train --epochs", tmp.path / "log"), 1);
    EXPECT_EQ(run_cli("report", tmp.path / "log"), 1);
    EXPECT_EQ(run_cli("--help", tmp.path / "log"), 0);
}

TEST(Cli, EvalWithMissingCheckpointIsRuntimeError)
{
    const TempDir tmp("cli_eval");
    EXPECT_EQ(run_cli("eval --checkpoint " + (tmp.path / "none.ivck").string(), tmp.path / "log"), 2);
}

TEST(Cli, SmokeTrainThenEval)
{
    const TempDir tmp("cli_smoke");
    const auto t0 = std::chrono::steady_clock::now();
    ASSERT_EQ(run_cli("train --config " + std::string(IVGAN_CONFIG_DIR) + "/smoke.toml --out " +
                          (tmp.path / "run").string(),
                      tmp.path / "train.log"),
              0)
        << slurp(tmp.path / "train.log");
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT(seconds, 60.0);
    for (const char* f : {"history.csv", "config.json", "provenance.json", "checkpoint.ivck"}) {
        EXPECT_TRUE(fs::exists(tmp.path / "run" / f)) << f;
    }
    const std::string history = slurp(tmp.path / "run" / "history.csv");
    EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 3);

    ASSERT_EQ(run_cli("eval --checkpoint " + (tmp.path / "run" / "checkpoint.ivck").string(), tmp.path / "eval.log"),
              0)
        << slurp(tmp.path / "eval.log");
    const fs::path eval_dir = tmp.path / "run" / "eval_test";
    EXPECT_EQ(slurp(eval_dir / "metrics.csv").substr(0, std::string(hn::kEvalMetricsColumns).size()),
              hn::kEvalMetricsColumns);
    EXPECT_TRUE(fs::exists(eval_dir / "summary.csv"));
    // smoke.toml: 4 train + 2 val, so the test split holds indices 6 and 7.
    EXPECT_TRUE(fs::exists(eval_dir / "overlays" / "test_0006.svg"));
    EXPECT_TRUE(fs::exists(eval_dir / "overlays" / "test_0007.svg"));
    EXPECT_EQ(run_cli("eval --split bogus --checkpoint " + (tmp.path / "run" / "checkpoint.ivck").string(),
                      tmp.path / "eval2.log"),
              1);
}

TEST(Cli, OutputRootRedirectsRelativeOutput)
{
    const TempDir tmp("cli_root");
    const std::string cmd = "IVGAN_OUTPUT_ROOT=" + tmp.path.string() + " " + IVGAN_CLI_PATH +
                            " gen-data --n-train 1 --n-val 1 --n-test 1 --out rel > /dev/null 2>&1";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_TRUE(fs::exists(tmp.path / "rel" / "manifest.json"));
}

TEST(Cli, SelftestExitCodes)
{
    const TempDir tmp("cli_selftest");
    EXPECT_EQ(run_cli("selftest --suite adam", tmp.path / "log"), 0) << slurp(tmp.path / "log");
    EXPECT_EQ(run_cli("selftest --suite adam --force-fail", tmp.path / "log"), 3);
    EXPECT_EQ(run_cli("selftest --suite nonsense", tmp.path / "log"), 1);
}

}  // namespace
