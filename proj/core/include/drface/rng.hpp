#pragma once

#include <cmath>
#include <cstdint>

namespace drface {

// Deterministic 64-bit generator (splitmix64). The standard library
// distributions are implementation-defined, so uniform/normal draws are
// produced here explicitly: identical seeds give identical streams on any
// platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection-sampled, bias-free.
    int uniform_int(int n) {
        const std::uint64_t bound = ~0ull - (~0ull % static_cast<std::uint64_t>(n));
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= bound);
        return static_cast<int>(x % static_cast<std::uint64_t>(n));
    }

    // Standard normal via Box-Muller; the paired draw is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // Derive an independent stream; used to decorrelate per-purpose draws
    // (init, shuffling, reparameterization) from one user-facing seed.
    Rng split(std::uint64_t stream_id) {
        Rng child(state_ ^ (0x5851f42d4c957f2dull * (stream_id + 1)));
        child.next_u64();
        return child;
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace drface
