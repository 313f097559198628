#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mwion {

// splitmix64 mixing step; used to derive independent stream seeds so every
// shot gets its own reproducible generator regardless of evaluation order.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// mt19937_64 engine with hand-rolled distributions: std::*_distribution is
// implementation-defined, these keep byte-identical outputs across toolchains.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

    // independent substream (per shot / per phase), reproducible regardless
    // of evaluation order
    Rng stream(std::uint64_t index) const { return Rng(derive_stream(seed_, index)); }

    std::uint64_t bits() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double gaussian() {
        // Box-Muller, one value per call; the discarded partner keeps the
        // stream layout deterministic
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
    }

    // exact Poisson sampler; Knuth multiplication, halved recursively for
    // large means (Poisson additivity) to avoid exp underflow
    long long poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean > 30.0) return poisson(mean / 2.0) + poisson(mean - mean / 2.0);
        const double limit = std::exp(-mean);
        long long k = -1;
        double prod = 1.0;
        do {
            ++k;
            prod *= uniform();
        } while (prod > limit);
        return k;
    }

    // index in [0, n) drawn with the given (unnormalized) weights
    int categorical(const double* w, int n) {
        double tot = 0.0;
        for (int i = 0; i < n; ++i) tot += w[i];
        double u = uniform() * tot;
        for (int i = 0; i < n - 1; ++i) {
            u -= w[i];
            if (u < 0.0) return i;
        }
        return n - 1;
    }

  private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
};

// Kahan compensated accumulator; shot averages must not depend on reduction
// order beyond 1e-12.
struct KahanSum {
    double sum = 0.0, comp = 0.0;
    void add(double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

} // namespace mwion
