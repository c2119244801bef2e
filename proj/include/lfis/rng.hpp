#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace lfis {

// SplitMix64 finalizer. Used both for seed expansion and for deriving
// child stream seeds.
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t kSeedGamma = 0x9e3779b97f4a7c15ULL;

// Counter-based seed split: child k of a stream keyed by `base` gets the
// seed mix(base + gamma*(k+1)). Every stream in the project is reachable
// from the master seed by a path of child() indices, so any replication
// or sequence can be replayed in isolation.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return splitmix64_mix(base + kSeedGamma * (index + 1));
}

// xoshiro256++ stream, seeded via SplitMix64. All stochastic operations in
// the library draw from an explicit RngStream; nothing uses global state.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : key_(seed) {
        std::uint64_t x = seed;
        for (auto& word : s_) {
            x += kSeedGamma;
            word = splitmix64_mix(x);
        }
    }

    std::uint64_t seed_key() const { return key_; }

    // Child derivation depends only on the seed key, never on how many
    // draws the parent has made.
    RngStream child(std::uint64_t index) const {
        return RngStream(derive_seed(key_, index));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Unbiased uniform integer in [0, n). Lemire's method.
    std::uint64_t uniform_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t threshold = -n % n;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Inclusive integer range.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
        return lo + static_cast<std::int64_t>(
                        uniform_below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    // Standard normal via Box-Muller (cosine branch only, so the draw count
    // per call is fixed and streams stay replayable).
    double normal() {
        const double u1 = uniform_open();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t key_;
    std::uint64_t s_[4];
};

} // namespace lfis
