// rng.hpp — counter-based splittable PRNG for reproducible parallel ensembles
//
// splitmix64 core (Vigna 2015, public domain). Each trajectory gets an
// independent stream derived from (master seed, trajectory index), so
// ensemble results do not depend on scheduling or worker count.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>

namespace qtraj {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += UINT64_C(0x9E3779B97F4A7C15));
        z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; implemented here (not std::normal_distribution)
    // so streams are bit-identical across standard libraries.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Complex Gaussian with unit variance: Re, Im each N(0, 1/2).
    std::complex<double> complex_gaussian() {
        constexpr double s = 0.70710678118654752440;  // 1/sqrt(2)
        double re = gaussian();
        double im = gaussian();
        return {s * re, s * im};
    }

    // Derive the seed for stream `index` from a master seed. Pure function of
    // (seed, index); hashing both through the splitmix64 mix decorrelates
    // nearby indices.
    static std::uint64_t split(std::uint64_t seed, std::uint64_t index) {
        SplitMix64 g(seed ^ mix(index + UINT64_C(0x632BE59BD9B4E019)));
        return g.next_u64();
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace qtraj
