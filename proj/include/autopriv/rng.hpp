#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace autopriv {

// 64-bit FNV-1a. Used for work-unit seed derivation and content hashing so
// that results do not depend on the standard library's hash implementation.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Derives a stream seed from a master seed plus any mix of string/integer parts.
struct SeedMixer {
    std::uint64_t state = 0xcbf29ce484222325ULL;

    SeedMixer& mix(std::uint64_t v) {
        state = hash_mix(state, v);
        return *this;
    }
    SeedMixer& mix(std::string_view s) {
        state = fnv1a64(s, state);
        state = hash_mix(state, 0x9e3779b97f4a7c15ULL);
        return *this;
    }
    std::uint64_t get() const { return state; }
};

template <typename... Parts>
std::uint64_t derive_seed(std::uint64_t master, Parts&&... parts) {
    SeedMixer m;
    m.mix(master);
    (m.mix(parts), ...);
    return m.get();
}

// Deterministic RNG wrapper. mt19937_64 is fully specified by the standard;
// the distributions below are hand-rolled because the standard ones are
// implementation-defined and would break cross-toolchain reproducibility.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n) without modulo bias (rejection sampling).
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    bool coin() { return (next_u64() & 1) != 0; }

    // Standard normal via Box-Muller.
    double normal() {
        const double u1 = 1.0 - unit();  // (0, 1]
        const double u2 = unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Laplace(0, scale). scale <= 0 degenerates to the constant 0.
    double laplace(double scale) {
        if (scale <= 0.0) return 0.0;
        const double u = unit() - 0.5;
        return -scale * (u < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::fabs(u));
    }

    // Gamma(alpha, 1) via Marsaglia-Tsang, boosted for alpha < 1.
    double gamma(double alpha) {
        if (alpha < 1.0) {
            const double u = 1.0 - unit();  // (0, 1]
            return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        const double d = alpha - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = 1.0 - unit();
            if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
                return d * v;
            }
        }
    }

    // Fisher-Yates shuffle over an index-like container.
    template <typename Vec>
    void shuffle(Vec& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace autopriv
