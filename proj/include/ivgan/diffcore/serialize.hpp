#pragma once

// Binary tensor format "IVT1", all integers little-endian:
//
//   bytes 0-3   magic "IVT1"
//   u32         rank
//   u64 x rank  extents
//   u32         dtype code (1 = float32, 2 = float64)
//   raw         numel values, IEEE-754 little-endian
//
// Gradients and graph history are not stored.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "ivgan/diffcore/tensor.hpp"

namespace ivgan {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

template <class T>
constexpr std::uint32_t dtype_code()
{
    if constexpr (std::is_same_v<T, float>) {
        return 1;
    } else {
        static_assert(std::is_same_v<T, double>, "only float and double tensors are supported");
        return 2;
    }
}

namespace io {

template <class U>
void write_pod(std::ostream& os, const U& value)
{
    os.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

template <class U>
U read_pod(std::istream& is, const char* what)
{
    U value{};
    if (!is.read(reinterpret_cast<char*>(&value), sizeof(U))) {
        throw IoError(std::string("truncated stream while reading ") + what);
    }
    return value;
}

}  // namespace io

template <class T>
void write_tensor(std::ostream& os, const Tensor<T>& t)
{
    os.write("IVT1", 4);
    io::write_pod(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) {
        io::write_pod(os, static_cast<std::uint64_t>(e));
    }
    io::write_pod(os, dtype_code<T>());
    os.write(reinterpret_cast<const char*>(t.values().data()), static_cast<std::streamsize>(t.numel() * sizeof(T)));
    if (!os) {
        throw IoError("failed to write tensor");
    }
}

template <class T>
Tensor<T> read_tensor(std::istream& is)
{
    char magic[4];
    if (!is.read(magic, 4)) {
        throw IoError("truncated stream while reading tensor magic");
    }
    if (std::memcmp(magic, "IVT1", 4) != 0) {
        throw IoError("bad tensor magic (expected IVT1)");
    }
    const auto rank = io::read_pod<std::uint32_t>(is, "tensor rank");
    if (rank == 0 || rank > 8) {
        throw IoError("implausible tensor rank " + std::to_string(rank));
    }
    Shape shape(rank);
    std::uint64_t total = 1;
    for (auto& e : shape) {
        const auto extent = io::read_pod<std::uint64_t>(is, "tensor extent");
        if (extent == 0 || extent > (std::uint64_t{1} << 32)) {
            throw IoError("implausible tensor extent " + std::to_string(extent));
        }
        total *= extent;
        if (total > (std::uint64_t{1} << 34)) {
            throw IoError("tensor too large");
        }
        e = static_cast<std::size_t>(extent);
    }
    const auto code = io::read_pod<std::uint32_t>(is, "tensor dtype");
    if (code != dtype_code<T>()) {
        throw IoError("tensor dtype code " + std::to_string(code) + " does not match expected " +
                      std::to_string(dtype_code<T>()));
    }
    std::vector<T> values(static_cast<std::size_t>(total));
    if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(T)))) {
        throw IoError("truncated stream while reading tensor values");
    }
    return Tensor<T>(std::move(shape), std::move(values));
}

}  // namespace ivgan
