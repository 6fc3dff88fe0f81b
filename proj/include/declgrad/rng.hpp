#pragma once

#include <cmath>
#include <cstdint>

namespace declgrad {

// Counter-based generator: each draw is a stateless hash of (key, counter),
// so substreams indexed off a parent key never overlap and the stream is
// identical across platforms for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(mix(mix(seed) ^ mix(stream + 0x632BE59BD9B4E019ULL))) {}

    // Independent substream addressed by index; deterministic in (parent, index).
    Rng substream(std::uint64_t index) const {
        Rng r = *this;
        r.key_ = mix(key_ ^ mix(index + 0x9E3779B97F4A7C15ULL));
        r.counter_ = 0;
        r.has_cached_ = false;
        return r;
    }

    std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

    // Uniform on (0, 1].
    double uniform() { return ((next_u64() >> 11) + 1) * 0x1.0p-53; }

    // Standard normal via Box-Muller; the paired draw is cached.
    double gaussian() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(t);
        has_cached_ = true;
        return r * std::cos(t);
    }

    // Uniform on [lo, hi).
    double uniform_in(double lo, double hi) { return lo + (hi - lo) * (uniform() - 0x1.0p-53); }

private:
    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

}  // namespace declgrad
