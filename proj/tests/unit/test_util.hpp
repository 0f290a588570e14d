#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "ivgan/geometry.hpp"
#include "ivgan/segment/segment.hpp"

namespace ivgan::test {

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag)
    {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() / ("ivgan_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline std::string slurp(const std::filesystem::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// Lumen is one hole-free component, lumen+plaque is one hole-free component
/// containing it, and neither touches the other's complement incorrectly.
inline bool labels_nested(const LabelMask& labels)
{
    const BinaryMask lu = segment::binarize(labels, segment::Region::lumen);
    const BinaryMask ma = segment::binarize(labels, segment::Region::lumen_plus_plaque);
    if (lu.count() == 0 || lu.count() >= ma.count()) {
        return false;
    }
    for (std::size_t i = 0; i < lu.values.size(); ++i) {
        if (lu.values[i] && !ma.values[i]) {
            return false;
        }
    }
    return segment::cleanup(lu) == lu && segment::cleanup(ma) == ma;
}

}  // namespace ivgan::test
