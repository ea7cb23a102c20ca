#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mkd {

using Rng = std::mt19937_64;

/// Independent random streams derived from one run seed. Keeping them apart
/// lets two runs that differ only in the loss see identical streams,
/// memory contents and retrievals.
enum class RngStream : std::uint32_t {
    schedule = 1,
    stream_order = 2,
    init = 3,
    reservoir = 4,
    retrieval = 5,
    augmentation = 6,
    dataset = 7,
    drift_subset = 8,
    teacher_training = 9,
    mkd_augmentation = 10,
};

inline Rng make_rng(std::uint64_t seed, RngStream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), 0x6d6b64u};
    return Rng(seq);
}

/// Uniform real in [0, 1) that does not depend on the standard library's
/// distribution implementation.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n) by rejection (n > 0).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % n;
}

/// Standard normal via Box-Muller.
inline double standard_normal(Rng& rng) {
    double u1;
    do {
        u1 = uniform01(rng);
    } while (u1 <= 0.0);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename It>
void shuffle(It first, It last, Rng& rng) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        const auto j = uniform_index(rng, i);
        std::swap(first[static_cast<std::ptrdiff_t>(i - 1)], first[static_cast<std::ptrdiff_t>(j)]);
    }
}

}  // namespace mkd
