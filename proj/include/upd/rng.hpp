#pragma once

// Counter-based deterministic RNG. Every parameter tensor draws from its own
// stream keyed on (seed, parameter path), so initialization is reproducible
// byte-for-byte regardless of construction order or threading.

#include <cmath>
#include <cstdint>
#include <string_view>

namespace upd {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class StreamRng {
public:
    StreamRng(std::uint64_t seed, std::string_view path)
        : key_(splitmix64(seed ^ fnv1a64(path))) {}

    explicit StreamRng(std::uint64_t key) : key_(key) {}

    // Uniform in (0,1], derived from (key, counter) alone.
    double next_uniform() {
        std::uint64_t bits = splitmix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
        return ((bits >> 11) + 1) * 0x1.0p-53;
    }

    double next_normal() {
        double u1 = next_uniform();
        double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Normal(0, sigma) truncated to two standard deviations.
    double next_trunc_normal(double sigma) {
        for (;;) {
            double z = next_normal();
            if (std::fabs(z) <= 2.0) return z * sigma;
        }
    }

    // Uniform integer in [0, n).
    std::uint64_t next_index(std::uint64_t n) {
        std::uint64_t bits = splitmix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
        return bits % n;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace upd
