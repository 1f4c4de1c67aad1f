// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "relight/core.hpp"

namespace relight {

/// One bracketed exposure: normalized linear pixel values in [0,1] plus the
/// exposure time in seconds. Radiance of an unsaturated sample is Z / dt.
struct ExposureFrame {
    LinearImage pixels;      // normalized Z in [0,1]
    double exposureSeconds;  // dt > 0

    void validate() const {
        pixels.validate("ExposureFrame");
        if (!(exposureSeconds > 0.0) || !std::isfinite(exposureSeconds))
            throw std::invalid_argument("ExposureFrame: exposure time must be finite and > 0");
        for (const Rgb& p : pixels.pixels())
            if (p.maxComponent() > 1.0)
                throw std::invalid_argument("ExposureFrame: normalized value above 1");
    }
};

struct ExposureStack {
    std::vector<ExposureFrame> frames;

    void validate() const {
        if (frames.empty())
            throw std::invalid_argument("ExposureStack: at least one frame required");
        for (const ExposureFrame& f : frames) {
            f.validate();
            if (!f.pixels.sameShape(frames.front().pixels))
                throw std::invalid_argument("ExposureStack: frame dimensions differ");
        }
    }
};

/// Triangular hat weight w(z) = 1 - |2z - 1|. Peaks at mid-exposure, zero at
/// both saturation ends.
inline double triangleWeight(double z) {
    if (!(z >= 0.0 && z <= 1.0))
        throw std::invalid_argument("triangleWeight: z must lie in [0,1]");
    return 1.0 - std::fabs(2.0 * z - 1.0);
}

struct MergeResult {
    LinearImage radiance;
    /// true marks pixels where some channel was saturated in every frame and
    /// the shortest-exposure fallback supplied the value.
    Mask saturatedFallback;
};

/// Weighted-average radiance merge of a bracketed stack:
///   L = sum_i w(Z_i) * (Z_i / dt_i) / sum_i w(Z_i)
/// Accumulation is double precision in a canonical frame order (sorted by
/// exposure time, ties broken on pixel payload), so any permutation of the
/// input frames produces bit-identical output.
inline MergeResult mergeExposures(const ExposureStack& stack) {
    stack.validate();
    const int w = stack.frames.front().pixels.width();
    const int h = stack.frames.front().pixels.height();
    const size_t n = stack.frames.size();

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t(0));
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const ExposureFrame& fa = stack.frames[a];
        const ExposureFrame& fb = stack.frames[b];
        if (fa.exposureSeconds != fb.exposureSeconds)
            return fa.exposureSeconds < fb.exposureSeconds;
        const std::vector<Rgb>& pa = fa.pixels.pixels();
        const std::vector<Rgb>& pb = fb.pixels.pixels();
        for (size_t i = 0; i < pa.size(); ++i)
            for (int c = 0; c < 3; ++c)
                if (pa[i][c] != pb[i][c]) return pa[i][c] < pb[i][c];
        return false;
    });

    MergeResult result{LinearImage(w, h), Mask(w, h, false)};
    for (size_t pix = 0; pix < result.radiance.pixelCount(); ++pix) {
        Rgb& out = result.radiance.pixels()[pix];
        bool fellBack = false;
        for (int c = 0; c < 3; ++c) {
            double num = 0.0;
            double den = 0.0;
            for (size_t k = 0; k < n; ++k) {
                const ExposureFrame& f = stack.frames[order[k]];
                const double z = f.pixels.pixels()[pix][c];
                const double wt = triangleWeight(z);
                num += wt * (z / f.exposureSeconds);
                den += wt;
            }
            if (den > 0.0) {
                out[c] = num / den;
            } else {
                // Channel clipped in every frame: take the shortest exposure's
                // raw radiance so highlights keep their magnitude.
                const ExposureFrame& shortest = stack.frames[order[0]];
                out[c] = shortest.pixels.pixels()[pix][c] / shortest.exposureSeconds;
                fellBack = true;
            }
        }
        if (fellBack)
            result.saturatedFallback.set(static_cast<int>(pix % w),
                                         static_cast<int>(pix / w), true);
    }
    return result;
}

}  // namespace relight
