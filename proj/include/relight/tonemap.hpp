// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include "relight/core.hpp"

namespace relight {

inline constexpr double kMetricGamma = 2.2;

/// Global Reinhard compression followed by gamma encoding, per channel:
/// x -> (x / (1 + x))^(1/2.2). Maps [0, inf) onto [0, 1), strictly monotone.
inline double toneMapValue(double x) {
    return std::pow(x / (1.0 + x), 1.0 / kMetricGamma);
}

/// Inverse of toneMapValue on [0, 1).
inline double inverseToneMapValue(double y) {
    const double u = std::pow(y, kMetricGamma);
    return u / (1.0 - u);
}

/// Display-range preprocessing applied to both prediction and ground truth
/// before metric computation.
inline LinearImage toneMapForMetrics(const LinearImage& hdr) {
    hdr.validate("toneMapForMetrics input");
    LinearImage out(hdr.width(), hdr.height());
    for (size_t i = 0; i < hdr.pixelCount(); ++i) {
        const Rgb& p = hdr.pixels()[i];
        out.pixels()[i] = Rgb(toneMapValue(p.r), toneMapValue(p.g), toneMapValue(p.b));
    }
    return out;
}

}  // namespace relight
