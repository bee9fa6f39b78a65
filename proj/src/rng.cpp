#include "sparseloc/rng.hpp"

#include <cmath>
#include <numbers>

namespace sparseloc {

namespace {
constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = mix64(seed ^ 0x5eed5eed5eed5eedULL);
    for (auto k : keys) h = mix64(h + kGamma + mix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

CounterRng::result_type CounterRng::at(std::uint64_t counter) const noexcept {
    return mix64(seed_ + (counter + 1) * kGamma);
}

double CounterRng::uniform() noexcept {
    // 53 random bits, shifted off zero.
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t CounterRng::below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    // Rejection to avoid modulo bias.
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
        x = (*this)();
    } while (x >= limit);
    return x % n;
}

} // namespace sparseloc
