#pragma once

// Deterministic pseudo-random numbers.
//
// The generator is xoshiro256** (Blackman & Vigna) seeded through SplitMix64.
// The integer stream depends only on the seed, so it is identical on every
// platform. Sub-streams are derived from the *seed* and a key, never from the
// current position, which makes `fork("dropout").fork(step)` independent of
// how many numbers the parent already produced.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace ivgan {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view text) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
{
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed)
    {
        std::uint64_t sm = seed;
        for (auto& word : state_) {
            word = detail::splitmix64(sm);
        }
    }

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept
    {
        const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    std::uint64_t uniform_int(std::uint64_t n) noexcept
    {
        if (n <= 1) {
            return 0;
        }
        const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
        std::uint64_t x = next_u64();
        while (x >= limit) {
            x = next_u64();
        }
        return x % n;
    }

    /// Standard normal variate (Box-Muller, second value cached).
    double normal() noexcept
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    Rng fork(std::uint64_t key) const noexcept
    {
        std::uint64_t sm = seed_ ^ (key * 0xD1B54A32D192ED03ULL + 0x632BE59BD9B4E019ULL);
        return Rng(detail::splitmix64(sm));
    }

    Rng fork(std::string_view key) const noexcept { return fork(detail::fnv1a64(key)); }

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Fisher-Yates shuffle driven by Rng (std::shuffle is implementation defined).
template <class Container>
void shuffle(Container& items, Rng& rng)
{
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

}  // namespace ivgan
