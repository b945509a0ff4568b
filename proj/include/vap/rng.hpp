#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace vap {

// Deterministic, portable PRNG (splitmix64 core). All randomness in the
// project flows through caller-owned instances; there is no global state.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n) {
        // rejection sampling to avoid modulo bias
        const std::uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller (one value per call, no caching so that
    // the stream position is easy to reason about).
    double normal() {
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        const double u2 = uniform();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    // Derives an independent stream for a named purpose. Streams forked with
    // different tags or indices never collide in practice.
    Rng fork(std::string_view tag, std::uint64_t index = 0) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag
        for (const char c : tag) {
            h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
            h *= 0x100000001b3ULL;
        }
        Rng child(state_ ^ h);
        child.state_ += 0x9e3779b97f4a7c15ULL * (index + 1);
        return child;
    }

    std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_int(i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace vap
