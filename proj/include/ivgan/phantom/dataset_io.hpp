#pragma once

// On-disk dataset layout written by `ivgan gen-data`:
//
//   <dir>/manifest.json                 spec, split indices, file list
//   <dir>/<split>/<index>_image.pgm     condition image, 8-bit, [-1,1] -> [0,255]
//   <dir>/<split>/<index>_labels.pgm    label map, values 0/1/2 (maxval 2)
//   <dir>/<split>/<index>_lu.txt        LU contour, one "x y" vertex per line
//   <dir>/<split>/<index>_ma.txt        MA contour

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ivgan/error.hpp"
#include "ivgan/geometry.hpp"
#include "ivgan/phantom/phantom.hpp"

namespace ivgan::phantom {

namespace fs = std::filesystem;

inline void write_pgm(const fs::path& path, std::size_t width, std::size_t height, const std::vector<std::uint8_t>& bytes,
                      unsigned maxval = 255)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot write " + path.string());
    }
    os << "P5\n" << width << ' ' << height << '\n' << maxval << '\n';
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) {
        throw IoError("write failed for " + path.string());
    }
}

struct PgmImage {
    std::size_t width = 0;
    std::size_t height = 0;
    unsigned maxval = 255;
    std::vector<std::uint8_t> bytes;
};

inline PgmImage read_pgm(const fs::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path.string());
    }
    auto next_token = [&]() {
        std::string tok;
        char ch;
        while (is.get(ch)) {
            if (ch == '#') {
                std::string skip;
                std::getline(is, skip);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(ch))) {
                if (!tok.empty()) {
                    break;
                }
                continue;
            }
            tok.push_back(ch);
        }
        return tok;
    };
    PgmImage img;
    if (next_token() != "P5") {
        throw IoError(path.string() + ": not a binary PGM (P5)");
    }
    try {
        img.width = std::stoul(next_token());
        img.height = std::stoul(next_token());
        img.maxval = static_cast<unsigned>(std::stoul(next_token()));
    } catch (const std::exception&) {
        throw IoError(path.string() + ": malformed PGM header");
    }
    if (img.maxval == 0 || img.maxval > 255 || img.width == 0 || img.height == 0) {
        throw IoError(path.string() + ": unsupported PGM geometry or maxval");
    }
    img.bytes.resize(img.width * img.height);
    if (!is.read(reinterpret_cast<char*>(img.bytes.data()), static_cast<std::streamsize>(img.bytes.size()))) {
        throw IoError(path.string() + ": truncated PGM data");
    }
    return img;
}

inline std::uint8_t condition_to_byte(float v)
{
    const double scaled = std::round((std::clamp(static_cast<double>(v), -1.0, 1.0) + 1.0) * 127.5);
    return static_cast<std::uint8_t>(scaled);
}

inline float byte_to_condition(std::uint8_t b) { return static_cast<float>(static_cast<double>(b) / 127.5 - 1.0); }

inline void write_contour(const fs::path& path, const Contour& c)
{
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot write " + path.string());
    }
    os << "# x y (pixel coordinates, closed polygon)\n";
    char buf[64];
    for (const Point& p : c.vertices) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.x, p.y);
        os << buf;
    }
}

inline Contour read_contour(const fs::path& path)
{
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open " + path.string());
    }
    Contour c;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        std::istringstream ls(line);
        Point p;
        if (!(ls >> p.x >> p.y)) {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 'x y'");
        }
        c.vertices.push_back(p);
    }
    return c;
}

inline void write_sample(const fs::path& dir, const std::string& split, const Sample& s)
{
    const std::string stem = sample_stem(split, s.index);
    std::vector<std::uint8_t> image(s.condition.width * s.condition.height);
    for (std::size_t i = 0; i < image.size(); ++i) {
        image[i] = condition_to_byte(s.condition.values[i]);
    }
    write_pgm(dir / (stem + "_image.pgm"), s.condition.width, s.condition.height, image);
    write_pgm(dir / (stem + "_labels.pgm"), s.labels.width, s.labels.height, s.labels.values, 2);
    write_contour(dir / (stem + "_lu.txt"), s.lu_contour);
    write_contour(dir / (stem + "_ma.txt"), s.ma_contour);
}

/// Writes manifest and every sample. Output bytes depend only on the dataset.
inline void write_dataset(const fs::path& dir, const Dataset& d)
{
    std::error_code ec;
    for (const char* split : {"train", "val", "test"}) {
        fs::create_directories(dir / split, ec);
        if (ec) {
            throw IoError("cannot create " + (dir / split).string() + ": " + ec.message());
        }
    }
    for (const auto& s : d.train) {
        write_sample(dir, "train", s);
    }
    for (const auto& s : d.val) {
        write_sample(dir, "val", s);
    }
    for (const auto& s : d.test) {
        write_sample(dir, "test", s);
    }
    std::ofstream os(dir / "manifest.json");
    if (!os) {
        throw IoError("cannot write " + (dir / "manifest.json").string());
    }
    os << d.manifest.dump(2) << '\n';
}

inline Sample read_sample(const fs::path& dir, const std::string& split, std::uint64_t index)
{
    const std::string stem = sample_stem(split, index);
    const PgmImage image = read_pgm(dir / (stem + "_image.pgm"));
    const PgmImage labels = read_pgm(dir / (stem + "_labels.pgm"));
    if (image.width != labels.width || image.height != labels.height) {
        throw IoError(stem + ": image and label map sizes differ");
    }
    Sample s;
    s.index = index;
    s.condition = Image(1, image.height, image.width);
    for (std::size_t i = 0; i < image.bytes.size(); ++i) {
        s.condition.values[i] = byte_to_condition(image.bytes[i]);
    }
    s.labels = LabelMask(labels.width, labels.height);
    for (std::size_t i = 0; i < labels.bytes.size(); ++i) {
        if (labels.bytes[i] > 2) {
            throw IoError(stem + "_labels.pgm: label value " + std::to_string(labels.bytes[i]) + " outside {0,1,2}");
        }
        s.labels.values[i] = labels.bytes[i];
    }
    s.target = target_from_labels(s.labels);
    s.lu_contour = read_contour(dir / (stem + "_lu.txt"));
    s.ma_contour = read_contour(dir / (stem + "_ma.txt"));
    s.center = centroid_of_vertices(s.lu_contour);
    return s;
}

inline nlohmann::json read_manifest(const fs::path& dir)
{
    std::ifstream is(dir / "manifest.json");
    if (!is) {
        throw IoError("cannot open " + (dir / "manifest.json").string());
    }
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError((dir / "manifest.json").string() + ": " + e.what());
    }
}

/// Loads every split listed in the manifest from disk.
inline Dataset read_dataset(const fs::path& dir)
{
    Dataset d;
    d.manifest = read_manifest(dir);
    d.spec = spec_from_json(d.manifest.at("spec"));
    for (auto [name, out] : {std::pair{"train", &d.train}, std::pair{"val", &d.val}, std::pair{"test", &d.test}}) {
        for (const auto& idx : d.manifest.at("splits").at(name)) {
            out->push_back(read_sample(dir, name, idx.get<std::uint64_t>()));
        }
    }
    return d;
}

}  // namespace ivgan::phantom
