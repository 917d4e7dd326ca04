#pragma once

// Portable random variates. std::mt19937_64's output sequence is fixed by
// the standard, but the library distributions are not, so the conversions
// to uniform and normal variates are done here.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <utility>

namespace mtcorr {

inline constexpr char const *rng_algorithm =
    "mt19937_64/uniform53/box-muller";

/// splitmix64 finalizer; derives independent substream seeds.
[[nodiscard]] constexpr auto mix_seed(std::uint64_t x) -> std::uint64_t {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class random_source {
    std::mt19937_64 engine_;

  public:
    explicit random_source(std::uint64_t seed) : engine_(seed) {}

    auto bits() -> std::uint64_t { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    auto uniform() -> double {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform on (0, 1].
    auto uniform_open_zero() -> double { return 1.0 - uniform(); }

    /// Uniform integer in [0, n), n > 0 (multiply-shift).
    auto below(std::uint64_t n) -> std::uint64_t {
        using u128 = unsigned __int128;
        return static_cast<std::uint64_t>(
            (static_cast<u128>(engine_()) * n) >> 64);
    }

    /// A pair of independent standard normals.
    auto normal_pair() -> std::pair<double, double> {
        double const r = std::sqrt(-2.0 * std::log(uniform_open_zero()));
        double const phi = 2.0 * std::numbers::pi * uniform();
        return {r * std::cos(phi), r * std::sin(phi)};
    }
};

} // namespace mtcorr
