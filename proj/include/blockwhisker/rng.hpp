#pragma once

#include <cmath>
#include <cstdint>

namespace bw {

// xoshiro256** seeded via splitmix64. std:: distributions are
// implementation-defined, so all draws are produced by hand to keep
// outputs byte-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : s_) {
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
        gaussSpare_ = 0.0;
        hasSpare_ = false;
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [lo, hi], both inclusive. Debiased via rejection.
    std::int64_t uniformInt(std::int64_t lo, std::int64_t hi) {
        if (hi <= lo) return lo;
        const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
        if (range == 0) return static_cast<std::int64_t>(next());
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        std::uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return lo + static_cast<std::int64_t>(v % range);
    }

    // Uniform in [0, 1).
    double uniformReal() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniformReal(double lo, double hi) { return lo + (hi - lo) * uniformReal(); }

    bool chance(double p) { return uniformReal() < p; }

    // Box-Muller with spare caching.
    double gaussian(double mean, double sigma) {
        if (hasSpare_) {
            hasSpare_ = false;
            return mean + sigma * gaussSpare_;
        }
        double u1;
        do {
            u1 = uniformReal();
        } while (u1 <= 0.0);
        const double u2 = uniformReal();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        gaussSpare_ = mag * std::sin(two_pi * u2);
        hasSpare_ = true;
        return mean + sigma * mag * std::cos(two_pi * u2);
    }

    // Derives an independent stream, e.g. per test or per mutant.
    Rng fork() { return Rng(next()); }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4]{};
    double gaussSpare_ = 0.0;
    bool hasSpare_ = false;
};

} // namespace bw
