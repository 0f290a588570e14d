#pragma once

// Merges runs.csv files from several experiment directories and renders
// standalone SVG charts (metric vs b for sweeps, metric per configuration).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ivgan/error.hpp"
#include "ivgan/harness/run.hpp"

namespace ivgan::harness {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const
    {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw Error("CSV lacks column '" + name + "'");
        }
        return static_cast<std::size_t>(it - header.begin());
    }
};

/// Plain comma-separated values without quoting (the harness never quotes).
inline CsvTable parse_csv(const std::string& text, const std::string& name)
{
    CsvTable t;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    const auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(s);
        while (std::getline(ls, cell, ',')) {
            cells.push_back(cell);
        }
        if (!s.empty() && s.back() == ',') {
            cells.emplace_back();
        }
        return cells;
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw IoError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                          " fields, found " + std::to_string(cells.size()));
        }
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) {
        throw IoError(name + ": empty CSV");
    }
    return t;
}

inline std::string to_csv(const CsvTable& t)
{
    std::ostringstream os;
    const auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            os << (i ? "," : "") << cells[i];
        }
        os << '\n';
    };
    line(t.header);
    for (const auto& r : t.rows) {
        line(r);
    }
    return os.str();
}

struct MergeResult {
    CsvTable merged;
    std::vector<std::string> warnings;
};

/// Concatenates runs.csv tables. Headers must agree exactly. Rows with the
/// same (experiment, config, seed) as an earlier row are dropped with a warning.
inline MergeResult merge_runs(const std::vector<std::pair<std::string, CsvTable>>& inputs)
{
    if (inputs.empty()) {
        throw ConfigError("report needs at least one run directory");
    }
    MergeResult out;
    out.merged.header = inputs.front().second.header;
    for (const auto& [name, t] : inputs) {
        if (t.header != out.merged.header) {
            throw Error("inconsistent columns: " + name + " does not match " + inputs.front().first);
        }
    }
    const std::size_t ce = out.merged.column("experiment");
    const std::size_t cc = out.merged.column("config");
    const std::size_t cs = out.merged.column("seed");
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (const auto& [name, t] : inputs) {
        for (const auto& row : t.rows) {
            if (!seen.emplace(row[ce], row[cc], row[cs]).second) {
                out.warnings.push_back("duplicate run " + row[ce] + "/" + row[cc] + " seed " + row[cs] + " in " +
                                       name + " ignored");
                continue;
            }
            out.merged.rows.push_back(row);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// SVG charts

struct Series {
    std::string name;
    std::vector<double> x, y;
};

namespace detail {

inline std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline const char* palette(std::size_t i)
{
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    return colours[i % 6];
}

struct Frame {
    double width = 640, height = 400, left = 70, right = 160, top = 40, bottom = 60;
    double y_min = 0, y_max = 1;
    double px(double t) const { return left + t * (width - left - right); }  // t in [0,1]
    double py(double v) const
    {
        const double t = y_max > y_min ? (v - y_min) / (y_max - y_min) : 0.5;
        return height - bottom - t * (height - top - bottom);
    }
};

inline void y_range(Frame& f, const std::vector<double>& values)
{
    double lo = INFINITY, hi = -INFINITY;
    for (double v : values) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!std::isfinite(lo)) {
        lo = 0, hi = 1;
    }
    const double pad = std::max(1e-3, 0.1 * (hi - lo));
    f.y_min = lo - pad;
    f.y_max = hi + pad;
}

inline void axes(std::ostringstream& os, const Frame& f, const std::string& title, const std::string& y_label)
{
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << f.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title
       << "</text>\n";
    os << "<line x1=\"" << f.left << "\" y1=\"" << f.py(f.y_min) << "\" x2=\"" << f.px(1) << "\" y2=\""
       << f.py(f.y_min) << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << f.left << "\" y1=\"" << f.py(f.y_min) << "\" x2=\"" << f.left << "\" y2=\""
       << f.py(f.y_max) << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = f.y_min + (f.y_max - f.y_min) * k / 4.0;
        os << "<text x=\"" << f.left - 6 << "\" y=\"" << num(f.py(v) + 4) << "\" text-anchor=\"end\">" << num(v)
           << "</text>\n";
    }
    os << "<text transform=\"translate(18," << f.height / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << y_label
       << "</text>\n";
}

inline void legend(std::ostringstream& os, const Frame& f, const std::vector<std::string>& names)
{
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double y = f.top + 20.0 * static_cast<double>(i);
        os << "<rect x=\"" << f.px(1) + 15 << "\" y=\"" << y << "\" width=\"12\" height=\"12\" fill=\"" << palette(i)
           << "\"/>\n<text x=\"" << f.px(1) + 32 << "\" y=\"" << y + 10 << "\">" << names[i] << "</text>\n";
    }
}

}  // namespace detail

/// Line chart with a log2 x axis (the b grid is powers of two).
inline std::string line_chart_log2(const std::string& title, const std::string& y_label, const std::vector<Series>& series)
{
    detail::Frame f;
    std::vector<double> all_y;
    double x_lo = INFINITY, x_hi = -INFINITY;
    for (const auto& s : series) {
        all_y.insert(all_y.end(), s.y.begin(), s.y.end());
        for (double x : s.x) {
            x_lo = std::min(x_lo, std::log2(x));
            x_hi = std::max(x_hi, std::log2(x));
        }
    }
    detail::y_range(f, all_y);
    if (!(x_hi > x_lo)) {
        x_lo -= 1, x_hi += 1;
    }
    const auto tx = [&](double x) { return f.px((std::log2(x) - x_lo) / (x_hi - x_lo)); };
    std::ostringstream os;
    detail::axes(os, f, title, y_label);
    std::set<double> ticks;
    for (const auto& s : series) {
        ticks.insert(s.x.begin(), s.x.end());
    }
    for (double x : ticks) {
        os << "<text x=\"" << detail::num(tx(x)) << "\" y=\"" << f.height - f.bottom + 18
           << "\" text-anchor=\"middle\">" << x << "</text>\n";
    }
    os << "<text x=\"" << f.px(0.5) << "\" y=\"" << f.height - 15 << "\" text-anchor=\"middle\">b</text>\n";
    std::vector<std::string> names;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        names.push_back(s.name);
        os << "<polyline fill=\"none\" stroke=\"" << detail::palette(i) << "\" stroke-width=\"2\" points=\"";
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            if (std::isfinite(s.y[k])) {
                os << detail::num(tx(s.x[k])) << ',' << detail::num(f.py(s.y[k])) << ' ';
            }
        }
        os << "\"/>\n";
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            if (std::isfinite(s.y[k])) {
                os << "<circle cx=\"" << detail::num(tx(s.x[k])) << "\" cy=\"" << detail::num(f.py(s.y[k]))
                   << "\" r=\"3\" fill=\"" << detail::palette(i) << "\"/>\n";
            }
        }
    }
    detail::legend(os, f, names);
    os << "</svg>\n";
    return os.str();
}

/// Grouped bar chart: one group per category, one bar per series.
inline std::string bar_chart(const std::string& title, const std::string& y_label,
                             const std::vector<std::string>& categories, const std::vector<Series>& series)
{
    detail::Frame f;
    f.bottom = 110;
    std::vector<double> all_y;
    for (const auto& s : series) {
        all_y.insert(all_y.end(), s.y.begin(), s.y.end());
    }
    detail::y_range(f, all_y);
    std::ostringstream os;
    detail::axes(os, f, title, y_label);
    const double n = static_cast<double>(std::max<std::size_t>(1, categories.size()));
    const double group = 1.0 / n;
    const double bar = group * 0.8 / static_cast<double>(std::max<std::size_t>(1, series.size()));
    std::vector<std::string> names;
    for (std::size_t i = 0; i < series.size(); ++i) {
        names.push_back(series[i].name);
        for (std::size_t c = 0; c < categories.size() && c < series[i].y.size(); ++c) {
            const double v = series[i].y[c];
            if (!std::isfinite(v)) {
                continue;
            }
            const double x0 = f.px(group * static_cast<double>(c) + group * 0.1 + bar * static_cast<double>(i));
            const double x1 = f.px(group * static_cast<double>(c) + group * 0.1 + bar * static_cast<double>(i + 1));
            os << "<rect x=\"" << detail::num(x0) << "\" y=\"" << detail::num(f.py(v)) << "\" width=\""
               << detail::num(x1 - x0) << "\" height=\"" << detail::num(f.py(f.y_min) - f.py(v)) << "\" fill=\""
               << detail::palette(i) << "\"/>\n";
        }
    }
    for (std::size_t c = 0; c < categories.size(); ++c) {
        const double x = f.px(group * (static_cast<double>(c) + 0.5));
        os << "<text transform=\"translate(" << detail::num(x) << "," << f.height - f.bottom + 14
           << ") rotate(35)\" text-anchor=\"start\">" << categories[c] << "</text>\n";
    }
    detail::legend(os, f, names);
    os << "</svg>\n";
    return os.str();
}

struct ReportOutput {
    MergeResult merge;
    std::vector<std::string> plots;  // file names written under plots/
};

/// Reads <dir>/runs.csv for each input and writes merged.csv and plots/*.svg.
inline ReportOutput build_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir)
{
    if (run_dirs.empty()) {
        throw ConfigError("report needs at least one run directory");
    }
    std::vector<std::pair<std::string, CsvTable>> inputs;
    for (const auto& d : run_dirs) {
        const fs::path p = d / "runs.csv";
        inputs.emplace_back(p.string(), parse_csv(read_text(p), p.string()));
    }
    ReportOutput out;
    out.merge = merge_runs(inputs);
    const CsvTable& t = out.merge.merged;
    write_text(out_dir / "merged.csv", to_csv(t));

    const std::size_t ce = t.column("experiment"), cc = t.column("config"), cb = t.column("b"),
                      cst = t.column("status");
    const std::size_t clu = t.column("lu_jm"), cma = t.column("ma_jm");
    std::vector<std::string> experiments;
    for (const auto& r : t.rows) {
        if (std::find(experiments.begin(), experiments.end(), r[ce]) == experiments.end()) {
            experiments.push_back(r[ce]);
        }
    }
    const auto value = [](const std::string& s) { return s.empty() ? std::nan("") : std::stod(s); };
    for (const auto& exp : experiments) {
        // Mean over seeds per configuration, in first-seen order.
        std::vector<std::string> configs;
        std::map<std::string, std::array<double, 3>> acc;  // lu sum, ma sum, count
        std::map<std::string, double> b_of;
        for (const auto& r : t.rows) {
            if (r[ce] != exp) {
                continue;
            }
            if (!acc.count(r[cc])) {
                configs.push_back(r[cc]);
                acc[r[cc]] = {0, 0, 0};
                b_of[r[cc]] = value(r[cb]);
            }
            if (r[cst] != "ok") {
                continue;
            }
            acc[r[cc]][0] += value(r[clu]);
            acc[r[cc]][1] += value(r[cma]);
            acc[r[cc]][2] += 1;
        }
        Series lu{"LU-JM", {}, {}}, ma{"MA-JM", {}, {}};
        for (const auto& c : configs) {
            const auto& a = acc[c];
            const double n = a[2];
            lu.x.push_back(b_of[c]);
            ma.x.push_back(b_of[c]);
            lu.y.push_back(n > 0 ? a[0] / n : std::nan(""));
            ma.y.push_back(n > 0 ? a[1] / n : std::nan(""));
        }
        const std::string bars = exp + "_jm_by_config.svg";
        write_text(out_dir / "plots" / bars, bar_chart(exp + ": Jaccard per configuration", "JM", configs, {lu, ma}));
        out.plots.push_back(bars);
        if (exp.rfind("beta_sweep", 0) == 0) {
            const std::string lines = exp + "_jm_vs_b.svg";
            write_text(out_dir / "plots" / lines, line_chart_log2(exp + ": Jaccard vs b", "JM", {lu, ma}));
            out.plots.push_back(lines);
        }
    }
    return out;
}

}  // namespace ivgan::harness
