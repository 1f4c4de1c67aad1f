// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "relight/core.hpp"

namespace relight {

/// Seeded generator with fully specified output: mt19937_64 for bits, fixed
/// mantissa mapping for uniforms, Box-Muller for normals. Identical seeds
/// give identical streams on every platform, which the sampler's
/// reproducibility contract relies on.
class DeterministicRng {
  public:
    explicit DeterministicRng(uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniformInt(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(uniform() * (hi - lo + 1));
    }

    double normal() {
        if (hasSpare_) {
            hasSpare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(kTau * u2);
        hasSpare_ = true;
        return mag * std::cos(kTau * u2);
    }

    Vec3 unitVector() {
        while (true) {
            const Vec3 v(normal(), normal(), normal());
            const double n = v.norm();
            if (n > 1e-6) return v / n;
        }
    }

  private:
    static constexpr double kTau = 6.283185307179586;
    std::mt19937_64 gen_;
    bool hasSpare_ = false;
    double spare_ = 0.0;
};

}  // namespace relight
