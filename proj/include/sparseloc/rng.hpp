#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace sparseloc {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent sub-seed from a parent seed and a path of keys,
/// e.g. derive_seed(seed, {trial, channel}).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept;

/// Counter-based generator: the n-th output is mix64(seed + n * golden_gamma).
/// Any element of the stream is addressable without generating its predecessors,
/// and the output depends only on (seed, counter). Satisfies
/// UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return at(counter_++); }
    result_type at(std::uint64_t counter) const noexcept;

    /// Uniform in the open interval (0, 1).
    double uniform() noexcept;
    /// Standard normal via Box-Muller; platform independent unlike std::normal_distribution.
    double normal() noexcept;
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept;

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace sparseloc
