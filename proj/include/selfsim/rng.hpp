// Copyright 2026 the selfsim authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SELFSIM_RNG_HPP
#define SELFSIM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace selfsim {

// Deterministic sampling helpers. std::uniform_real_distribution and
// std::normal_distribution are implementation-defined, so reports that
// promise bit-identical reruns draw through these instead.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    // uniform in [0,1)
    double unit() {
        return std::ldexp(static_cast<double>(gen_() >> 11), -53);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // standard normal, Box-Muller
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = unit();
        } while (u1 <= 0.0);
        double u2 = unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    std::vector<double> normal_vector(int n) {
        std::vector<double> v(static_cast<size_t>(n));
        for (auto& x : v) x = normal();
        return v;
    }

    uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace selfsim

#endif
