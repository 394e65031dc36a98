#pragma once

#include <cmath>
#include <cstdint>

namespace photomech {

// splitmix64: tiny counter-friendly PRNG. Used everywhere instead of
// <random> engines so that streams are reproducible byte-for-byte across
// platforms and independent of how work is split between threads.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in (0, 1); never returns 0 so log() is safe
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }
};

// Derive an independent substream seed from (master seed, stream index).
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
    SplitMix64 mix(master ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL));
    mix.next_u64();
    return mix.next_u64();
}

// Standard normal variates by Box-Muller. Deterministic given the stream.
class GaussianStream {
  public:
    explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double u1 = rng_.next_uniform();
        const double u2 = rng_.next_uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    double next_uniform() { return rng_.next_uniform(); }
    std::uint64_t next_u64() { return rng_.next_u64(); }

    // Poisson variate; inversion for small mean, otherwise sum of exponentials
    // is avoided in favor of PTRS-free simple splitting (mean here stays small).
    int next_poisson(double mean) {
        if (mean <= 0.0) return 0;
        int k = 0;
        double p = 1.0;
        const double l = std::exp(-mean);
        do {
            ++k;
            p *= next_uniform();
        } while (p > l);
        return k - 1;
    }

  private:
    SplitMix64 rng_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace photomech
