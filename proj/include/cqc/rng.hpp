#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace cqc {

/// Stateless 64-bit finalizer (splitmix64 / Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based generator: the i-th output is a pure function of (key, i),
/// so streams can be split by deriving new keys without sharing state.
/// Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit constexpr CounterRng(std::uint64_t seed) noexcept : key_(mix64(seed ^ 0x5851f42d4c957f2dULL)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        return mix64(key_ ^ mix64(counter_++ + 0x632be59bd9b4e019ULL));
    }

    /// Independent child stream; the parent is not advanced.
    constexpr CounterRng split(std::uint64_t stream) const noexcept {
        CounterRng child{0};
        child.key_ = mix64(key_ + mix64(stream ^ 0xd1b54a32d192ed03ULL));
        return child;
    }

    constexpr std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(CounterRng& rng) noexcept {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(CounterRng& rng, double p) noexcept {
    return uniform01(rng) < p;
}

/// Uniform integer in [0, bound) by Lemire's multiply-shift rejection.
inline std::uint64_t uniform_index(CounterRng& rng, std::uint64_t bound) noexcept {
    if (bound <= 1) {
        return 0;
    }
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const unsigned __int128 m = static_cast<unsigned __int128>(rng()) * bound;
        if (static_cast<std::uint64_t>(m) >= threshold) {
            return static_cast<std::uint64_t>(m >> 64);
        }
    }
}

/// Inverse-CDF draw from a finite probability vector.
inline std::size_t sample_index(CounterRng& rng, std::span<const double> probs) noexcept {
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > 0.0) {
            last_positive = i;
        }
        acc += probs[i];
        if (u < acc) {
            return i;
        }
    }
    return last_positive;
}

}  // namespace cqc
