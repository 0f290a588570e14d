// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Criteria given as arguments (e.g. `acceptance 6 12`)
// restrict the run to that subset.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ivgan/harness/report.hpp"
#include "ivgan/selftest/suites.hpp"

namespace {

namespace fs = std::filesystem;
namespace st = ivgan::selftest;

struct Outcome {
    bool passed = false;
    std::string detail;
};

struct Criterion {
    int number;
    std::string title;
    std::function<Outcome(const fs::path& work)> check;
};

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

int cli(const std::string& args, const fs::path& log)
{
    const std::string cmd = std::string(IVGAN_CLI_PATH) + " " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const char* name) { return (fs::path(IVGAN_CONFIG_DIR) / name).string(); }

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double v, int digits = 4)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// Runs the selftest suite registered for `criterion` in-process.
Outcome from_suite(const std::string& criterion, double time_limit = 0.0)
{
    for (const auto& s : st::suites()) {
        if (s.criterion != criterion) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        const auto checks = s.run();
        const double elapsed = seconds_since(t0);
        std::size_t ok = 0;
        std::string first_failure;
        for (const auto& c : checks) {
            ok += c.passed ? 1 : 0;
            if (!c.passed && first_failure.empty()) {
                first_failure = c.name + ": " + c.detail;
            }
        }
        Outcome o;
        o.passed = !checks.empty() && ok == checks.size() && (time_limit <= 0.0 || elapsed < time_limit);
        o.detail = std::to_string(ok) + "/" + std::to_string(checks.size()) + " checks";
        if (!first_failure.empty()) {
            o.detail += "; first failure " + first_failure;
        }
        if (time_limit > 0.0) {
            o.detail += "; " + fixed(elapsed, 1) + " s (limit " + fixed(time_limit, 0) + " s)";
        }
        return o;
    }
    return {false, "no suite registered"};
}

/// Final-epoch validation (lu_jm, ma_jm) from a history.csv.
std::pair<double, double> final_validation_jm(const fs::path& history)
{
    const auto t = ivgan::harness::parse_csv(slurp(history), history.string());
    if (t.rows.empty()) {
        throw ivgan::Error("empty history " + history.string());
    }
    const auto& last = t.rows.back();
    return {std::stod(last[t.column("lu_jm")]), std::stod(last[t.column("ma_jm")])};
}

double summary_mean(const fs::path& summary, const std::string& metric)
{
    const auto t = ivgan::harness::parse_csv(slurp(summary), summary.string());
    for (const auto& r : t.rows) {
        if (r[t.column("metric")] == metric) {
            return std::stod(r[t.column("mean")]);
        }
    }
    throw ivgan::Error(metric + " missing from " + summary.string());
}

Outcome determinism(const fs::path& work)
{
    for (const char* run : {"a", "b"}) {
        const fs::path out = work / "determinism" / run;
        if (cli("train --config " + config("smoke.toml") + " --out " + out.string(), work / "determinism.log") != 0) {
            return {false, "train failed: " + slurp(work / "determinism.log")};
        }
    }
    const fs::path a = work / "determinism" / "a", b = work / "determinism" / "b";
    const bool history = slurp(a / "history.csv") == slurp(b / "history.csv");
    const bool ckpt = slurp(a / "checkpoint.ivck") == slurp(b / "checkpoint.ivck") &&
                      !slurp(a / "checkpoint.ivck").empty();
    return {history && ckpt, std::string("history ") + (history ? "identical" : "differs") + ", checkpoint " +
                                 (ckpt ? "identical" : "differs")};
}

Outcome overfit(const fs::path& work)
{
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path run = work / "overfit";
    if (cli("train --config " + config("overfit.toml") + " --out " + run.string(), work / "overfit.log") != 0) {
        return {false, "train failed: " + slurp(work / "overfit.log")};
    }
    if (cli("eval --split train --no-overlays --checkpoint " + (run / "checkpoint.ivck").string() + " --out " +
                (run / "eval").string(),
            work / "overfit_eval.log") != 0) {
        return {false, "eval failed: " + slurp(work / "overfit_eval.log")};
    }
    const double elapsed = seconds_since(t0);
    const double lu = summary_mean(run / "eval" / "summary.csv", "lu_jm");
    return {lu > 0.95 && elapsed < 300.0,
            "LU-JM on the training sample " + fixed(lu) + " (need > 0.95); " + fixed(elapsed, 1) + " s (limit 300 s)"};
}

/// Shared by criteria 8 and 9: default config per seed, with b=100 and b=0.
struct SeedRuns {
    std::vector<std::pair<double, double>> combined, adversarial_only;
    double seconds_combined = 0.0;
    std::string error;
};

const SeedRuns& seed_runs(const fs::path& work)
{
    static SeedRuns runs;
    static bool done = false;
    if (done) {
        return runs;
    }
    done = true;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        for (bool adversarial_only : {false, true}) {
            const std::string tag = (adversarial_only ? "b0_seed" : "b100_seed") + std::to_string(seed);
            const fs::path out = work / "quality" / tag;
            const auto t0 = std::chrono::steady_clock::now();
            const std::string args = "train --config " + config("default.toml") + " --seed " + std::to_string(seed) +
                                     (adversarial_only ? " --b 0" : "") + " --out " + out.string();
            std::cout << "  training " << tag << " ..." << std::flush;
            if (cli(args, work / (tag + ".log")) != 0) {
                runs.error = tag + " failed: " + slurp(work / (tag + ".log"));
                std::cout << " failed\n";
                return runs;
            }
            const double elapsed = seconds_since(t0);
            const auto jm = final_validation_jm(out / "history.csv");
            std::cout << " " << fixed(elapsed, 1) << " s, LU-JM " << fixed(jm.first) << ", MA-JM " << fixed(jm.second)
                      << '\n';
            (adversarial_only ? runs.adversarial_only : runs.combined).push_back(jm);
            if (!adversarial_only) {
                runs.seconds_combined += elapsed;
            }
        }
    }
    return runs;
}

Outcome quality(const fs::path& work)
{
    const SeedRuns& r = seed_runs(work);
    if (!r.error.empty()) {
        return {false, r.error};
    }
    int good = 0;
    std::string per_seed;
    for (std::size_t s = 0; s < r.combined.size(); ++s) {
        const auto [lu, ma] = r.combined[s];
        good += (lu >= 0.85 && ma >= 0.85) ? 1 : 0;
        per_seed += (s ? ", " : "") + std::string("seed ") + std::to_string(s) + " " + fixed(lu) + "/" + fixed(ma);
    }
    return {good >= 2 && r.seconds_combined < 1800.0,
            "LU/MA-JM " + per_seed + "; " + std::to_string(good) + "/3 seeds >= 0.85; " + fixed(r.seconds_combined, 0) +
                " s (limit 1800 s)"};
}

Outcome ablation_trend(const fs::path& work)
{
    const SeedRuns& r = seed_runs(work);
    if (!r.error.empty()) {
        return {false, r.error};
    }
    int wins = 0;
    std::string per_seed;
    for (std::size_t s = 0; s < r.combined.size(); ++s) {
        const double with_rec = r.combined[s].first, without = r.adversarial_only[s].first;
        wins += with_rec >= without ? 1 : 0;
        per_seed += (s ? ", " : "") + std::string("seed ") + std::to_string(s) + " " + fixed(with_rec) + " vs " +
                    fixed(without);
    }
    return {wins >= 2, "LU-JM b=100 vs b=0: " + per_seed + "; combined not worse in " + std::to_string(wins) + "/3"};
}

Outcome cli_contract(const fs::path& work)
{
    const int ok = cli("selftest", work / "selftest.log");
    const int forced = cli("selftest --suite adam --force-fail", work / "selftest_fail.log");
    std::string tally;
    std::istringstream log(slurp(work / "selftest.log"));
    for (std::string line; std::getline(log, line);) {
        if (line.find("checks passed") != std::string::npos) {
            tally = line;
        }
    }
    return {ok == 0 && forced == 3, "selftest exit " + std::to_string(ok) + " (" + tally +
                                        "), forced failure exit " + std::to_string(forced)};
}

}  // namespace

int main(int argc, char** argv)
{
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        only.insert(std::atoi(argv[i]));
    }
    const std::vector<Criterion> criteria = {
        {1, "gradient correctness", [](const fs::path&) { return from_suite("1", 120.0); }},
        {2, "adjoint identity", [](const fs::path&) { return from_suite("2"); }},
        {3, "metric oracles", [](const fs::path&) { return from_suite("3"); }},
        {4, "geometry", [](const fs::path&) { return from_suite("4"); }},
        {5, "closed-loop truth", [](const fs::path&) { return from_suite("5"); }},
        {6, "determinism", determinism},
        {7, "overfit sanity", overfit},
        {8, "desk-scale quality", quality},
        {9, "ablation trend", ablation_trend},
        {10, "parameter counting", [](const fs::path&) { return from_suite("10"); }},
        {11, "Adam oracle", [](const fs::path&) { return from_suite("11"); }},
        {12, "CLI contract", cli_contract},
    };

    const fs::path work = fs::temp_directory_path() / ("ivgan_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(work);
    ::unsetenv("IVGAN_OUTPUT_ROOT");

    int failures = 0;
    const auto start = std::chrono::steady_clock::now();
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.number)) {
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check(work);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.passed ? 0 : 1;
        std::cout << (o.passed ? "PASS" : "FAIL") << " criterion " << c.number << " (" << c.title << "): " << o.detail
                  << " [" << fixed(seconds_since(t0), 1) << " s]\n"
                  << std::flush;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << " in "
              << fixed(seconds_since(start), 1) << " s\n";
    std::error_code ec;
    fs::remove_all(work, ec);
    return failures == 0 ? 0 : 1;
}
