#pragma once

#include <cstdint>
#include <random>

namespace otmap {

using Rng = std::mt19937_64;

/// Stateless 64-bit mixer (SplitMix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Counter-based seed expansion: every (stream, index) pair under a base seed
/// maps to an independent engine seed, so results never depend on scheduling.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) noexcept;

Rng make_rng(std::uint64_t seed);

/// Uniform on [0, 1) with 53 random bits.
double uniform01(Rng& rng);
/// Standard normal via the Marsaglia polar method.
double standard_normal(Rng& rng);
/// Uniform integer in [0, n).
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// Stream tags used with derive_seed across modules.
namespace streams {
inline constexpr std::uint64_t source_sample = 1;
inline constexpr std::uint64_t target_sample = 2;
inline constexpr std::uint64_t replication = 3;
inline constexpr std::uint64_t smoothing_source = 4;
inline constexpr std::uint64_t smoothing_target = 5;
inline constexpr std::uint64_t reference_x = 6;
inline constexpr std::uint64_t reference_y = 7;
inline constexpr std::uint64_t null_draw = 8;
inline constexpr std::uint64_t trial = 9;
inline constexpr std::uint64_t dense_reference = 10;
}  // namespace streams

}  // namespace otmap
