#ifndef FEWSTEP_RNG_HPP
#define FEWSTEP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

#include "fewstep/tensor.hpp"

namespace fewstep {

// Deterministic random stream. Normal draws use plain Box-Muller on top of
// mt19937_64 so the byte-for-byte replay contract does not depend on the
// standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Uniform in [0, 1).
    double uniform() {
        return (eng_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        // rejection-free modulo is fine at desk scale (n << 2^64)
        return eng_() % n;
    }

    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    LatentTensor normal_tensor(const Shape& shape) {
        LatentTensor out(shape);
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = normal();
        return out;
    }

    // Independently seeded child stream; stable under call order of the parent.
    Rng fork(std::uint64_t stream) const {
        std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return Rng(z ^ (z >> 31));
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
};

}  // namespace fewstep

#endif
