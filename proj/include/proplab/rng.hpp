#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace proplab {

// FNV-1a, used for stream derivation and content hashing. Platform-independent
// by construction (no std::hash).
constexpr std::uint64_t fnv1a(std::string_view s,
                              std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Named, indexed random stream derived from a master seed. Separate streams
// ("clicks", "bookings", "scores", "policy", ...) let one noise source be
// toggled without perturbing the others, and a per-query index keeps
// simulation order-independent.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::string_view name,
              std::uint64_t index = 0)
        : engine_(mix64(mix64(master_seed ^ fnv1a(name)) ^ index)) {}

    std::mt19937_64& engine() { return engine_; }

    // Uniform on [0, 1).
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    double gaussian(double mean, double sd) {
        std::normal_distribution<double> d(mean, sd);
        return d(engine_);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace proplab
