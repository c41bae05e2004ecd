#pragma once

#include <cmath>
#include <cstdint>

namespace iled {

// Deterministic, platform-independent RNG. std::shuffle and the std
// distributions are implementation-defined, so everything that feeds results
// (init, window shuffling, initial conditions) goes through this generator.
//
// splitmix64 state transition; `fork` derives an independent stream, which
// gives per-trajectory / per-layer reproducibility regardless of evaluation
// order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one value per call keeps the stream layout obvious.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Unbiased integer in [0, n) via rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t lim = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= lim);
        return v % n;
    }

    // Independent substream keyed by `stream`; does not advance this state.
    Rng fork(std::uint64_t stream) const {
        Rng r(state_ ^ (0xA0761D6478BD642Full * (stream + 1)));
        r.next_u64();
        return r;
    }

private:
    std::uint64_t state_;
};

// Fisher-Yates with the deterministic RNG above.
template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace iled
