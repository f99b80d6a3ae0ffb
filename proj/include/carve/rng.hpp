#pragma once

#include <cstdint>
#include <string_view>

// Self-contained random number generation. The standard library's
// distributions are implementation-defined, so everything that feeds
// reproducible output uses these explicit transforms instead: one pipeline
// seed, sub-streams derived by name, identical sequences on every platform.

namespace carve {

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // splitmix64: passes practical statistical tests, two ops per draw.
    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n >= 1.
    std::uint64_t below(std::uint64_t n) {
        // Multiply-shift; bias is < 2^-53 for the n used here.
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    }

    // Standard normal via Box-Muller (the cached second value keeps draws
    // at one transcendental pair per two samples).
    double normal();

    // Child stream whose sequence is independent of draws taken from this
    // one; `tag` names the consumer so streams cannot collide by accident.
    Rng derive(std::string_view tag) const;

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace carve
