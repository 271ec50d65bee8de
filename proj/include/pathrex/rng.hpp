#pragma once

#include <cstdint>

#include "pathrex/errors.hpp"

namespace pathrex {

// Counter-based generator: output i is a fixed 64-bit mix of (seed, i), the
// splitmix64 finalizer over a Weyl sequence. Same seed gives the same stream
// on every platform, and fork() derives independent child streams so that
// per-item randomness does not depend on thread scheduling or replay order.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() { return mix(seed_ + (++counter_) * kGamma); }

    // uniform in [0, 1)
    double next_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double next_range(double lo, double hi) { return lo + (hi - lo) * next_real(); }

    // uniform in {0, ..., n-1}, unbiased via rejection
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("SeededRng::next_below: n must be positive");
        const std::uint64_t min = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t v = next_u64();
            if (v >= min) return v % n;
        }
    }

    bool next_bool() { return (next_u64() & 1u) != 0; }

    // Independent child stream; does not advance this generator.
    SeededRng fork(std::uint64_t stream) const {
        return SeededRng(mix((seed_ ^ 0xd1b54a32d192ed03ull) + stream * kGamma));
    }

    std::uint64_t seed() const { return seed_; }

    template <typename Vec>
    void shuffle(Vec& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            using std::swap;
            swap(v[i - 1], v[j]);
        }
    }

private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

}  // namespace pathrex
