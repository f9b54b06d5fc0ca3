#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fusion {

// Deterministic random source. The engine is mt19937_64 (its sequence is
// fixed by the standard); uniform/normal conversions are done by hand because
// std::*_distribution output is implementation-defined. Every reproducibility
// guarantee in this project (datasets, init, training, checkpoints) rests on
// all randomness flowing through this class.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // [0, 1), 53-bit resolution
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    int uniform_int(int n) { return static_cast<int>(eng_() % static_cast<std::uint64_t>(n)); }

    // Box-Muller; one spare value is cached between calls
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 1e-300);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925287 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// splitmix64 chain; used to derive independent sub-seeds from (seed, stream
// ids) so that parallel and serial generation agree bit-exactly.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                              std::uint64_t d = 0) {
    std::uint64_t s = a;
    auto step = [&s](std::uint64_t v) {
        s += 0x9E3779B97F4A7C15ull + v;
        std::uint64_t z = s;
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ull;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBull;
        z ^= z >> 31;
        s = z;
    };
    step(b);
    step(c);
    step(d);
    return s;
}

}  // namespace fusion
