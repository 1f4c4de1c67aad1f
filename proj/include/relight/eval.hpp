// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "relight/core.hpp"
#include "relight/tonemap.hpp"

namespace relight {

inline constexpr double kPsnrCapDb = 100.0;

struct AlignResult {
    double alpha = 1.0;
    bool degenerate = false;  // all-zero prediction over the valid set
};

/// Closed-form least-squares intensity alignment: the alpha minimizing
/// ||pred * alpha - gt||^2 over valid pixels, jointly across channels.
inline AlignResult alignScale(const LinearImage& pred, const LinearImage& gt,
                              const Mask* mask = nullptr) {
    if (!pred.sameShape(gt))
        throw std::invalid_argument("alignScale: shape mismatch");
    if (mask && !mask->sameShape(pred))
        throw std::invalid_argument("alignScale: mask shape mismatch");
    double num = 0.0, den = 0.0;
    for (int y = 0; y < pred.height(); ++y)
        for (int x = 0; x < pred.width(); ++x) {
            if (mask && !mask->at(x, y)) continue;
            const Rgb& p = pred.at(x, y);
            const Rgb& g = gt.at(x, y);
            for (int c = 0; c < 3; ++c) {
                num += p[c] * g[c];
                den += p[c] * p[c];
            }
        }
    if (den == 0.0) return {1.0, true};
    return {num / den, false};
}

namespace detail {

inline size_t countValid(const LinearImage& a, const Mask* mask) {
    if (!mask) return a.pixelCount();
    return mask->countTrue();
}

inline void checkMetricInputs(const LinearImage& pred, const LinearImage& gt,
                                const Mask* mask, const char* what) {
    if (!pred.sameShape(gt))
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
    if (mask && !mask->sameShape(pred))
        throw std::invalid_argument(std::string(what) + ": mask shape mismatch");
    for (const LinearImage* img : {&pred, &gt})
        for (const Rgb& p : img->pixels())
            for (int c = 0; c < 3; ++c)
                if (!std::isfinite(p[c]) || p[c] < 0.0 || p[c] > 1.0)
                    throw std::invalid_argument(std::string(what) +
                                                ": inputs must lie in [0,1]");
}

}  // namespace detail

/// PSNR over valid pixels with data range 1, capped at 100 dB.
inline double psnr(const LinearImage& pred, const LinearImage& gt,
                   const Mask* mask = nullptr) {
    detail::checkMetricInputs(pred, gt, mask, "psnr");
    double sum = 0.0;
    size_t valid = 0;
    for (int y = 0; y < pred.height(); ++y)
        for (int x = 0; x < pred.width(); ++x) {
            if (mask && !mask->at(x, y)) continue;
            ++valid;
            for (int c = 0; c < 3; ++c) {
                const double d = pred.at(x, y)[c] - gt.at(x, y)[c];
                sum += d * d;
            }
        }
    if (valid == 0) throw std::invalid_argument("psnr: empty valid set");
    const double mse = sum / (3.0 * static_cast<double>(valid));
    if (mse == 0.0) return kPsnrCapDb;
    return std::min(10.0 * std::log10(1.0 / mse), kPsnrCapDb);
}

/// Mean SSIM on the per-pixel RGB mean, 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, data range 1. A window contributes only when it lies
/// fully inside the image and every pixel under it is valid.
inline double ssim(const LinearImage& pred, const LinearImage& gt,
                   const Mask* mask = nullptr) {
    detail::checkMetricInputs(pred, gt, mask, "ssim");
    constexpr int kWindow = 11;
    constexpr int kHalf = kWindow / 2;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    const int w = pred.width(), h = pred.height();
    if (w < kWindow || h < kWindow)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");

    double kernel[kWindow][kWindow];
    double ksum = 0.0;
    for (int dy = -kHalf; dy <= kHalf; ++dy)
        for (int dx = -kHalf; dx <= kHalf; ++dx) {
            const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
            kernel[dy + kHalf][dx + kHalf] = v;
            ksum += v;
        }
    for (auto& row : kernel)
        for (double& v : row) v /= ksum;

    std::vector<double> a(pred.pixelCount()), b(pred.pixelCount());
    for (size_t i = 0; i < pred.pixelCount(); ++i) {
        const Rgb& p = pred.pixels()[i];
        const Rgb& g = gt.pixels()[i];
        a[i] = (p.r + p.g + p.b) / 3.0;
        b[i] = (g.r + g.g + g.b) / 3.0;
    }

    double total = 0.0;
    size_t windows = 0;
    for (int y = kHalf; y < h - kHalf; ++y) {
        for (int x = kHalf; x < w - kHalf; ++x) {
            if (mask) {
                bool allValid = true;
                for (int dy = -kHalf; dy <= kHalf && allValid; ++dy)
                    for (int dx = -kHalf; dx <= kHalf; ++dx)
                        if (!mask->at(x + dx, y + dy)) {
                            allValid = false;
                            break;
                        }
                if (!allValid) continue;
            }
            double muA = 0.0, muB = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
            for (int dy = -kHalf; dy <= kHalf; ++dy)
                for (int dx = -kHalf; dx <= kHalf; ++dx) {
                    const double kv = kernel[dy + kHalf][dx + kHalf];
                    const double va = a[static_cast<size_t>(y + dy) * w + (x + dx)];
                    const double vb = b[static_cast<size_t>(y + dy) * w + (x + dx)];
                    muA += kv * va;
                    muB += kv * vb;
                    aa += kv * va * va;
                    bb += kv * vb * vb;
                    ab += kv * va * vb;
                }
            const double varA = aa - muA * muA;
            const double varB = bb - muB * muB;
            const double cov = ab - muA * muB;
            const double num = (2.0 * muA * muB + kC1) * (2.0 * cov + kC2);
            const double den = (muA * muA + muB * muB + kC1) * (varA + varB + kC2);
            total += num / den;
            ++windows;
        }
    }
    if (windows == 0) throw std::invalid_argument("ssim: empty valid window set");
    return total / static_cast<double>(windows);
}

/// Scores of one aligned, tone-mapped prediction against its ground truth.
/// The LPIPS slot is deliberately absent (tracked with a reason string).
struct MetricsReport {
    double alpha = 1.0;
    bool alphaDegenerate = false;
    double psnrDb = 0.0;
    double ssim = 0.0;
    size_t validPixelCount = 0;
    std::string scene;
    std::string lighting;

    static constexpr const char* kLpipsAbsentReason =
        "lpips requires a pretrained perceptual network and is not computed";
};

/// Full scoring pipeline: least-squares scale alignment on linear radiance,
/// tone map both sides, then masked PSNR and SSIM.
inline MetricsReport evaluateRelight(const LinearImage& predLinear,
                                     const LinearImage& gtLinear,
                                     const Mask* mask = nullptr,
                                     std::string scene = {},
                                     std::string lighting = {}) {
    predLinear.validate("evaluateRelight prediction");
    gtLinear.validate("evaluateRelight ground truth");
    const AlignResult align = alignScale(predLinear, gtLinear, mask);

    LinearImage aligned(predLinear.width(), predLinear.height());
    for (size_t i = 0; i < predLinear.pixelCount(); ++i)
        aligned.pixels()[i] = predLinear.pixels()[i] * align.alpha;

    const LinearImage tmPred = toneMapForMetrics(aligned);
    const LinearImage tmGt = toneMapForMetrics(gtLinear);

    MetricsReport report;
    report.alpha = align.alpha;
    report.alphaDegenerate = align.degenerate;
    report.psnrDb = psnr(tmPred, tmGt, mask);
    report.ssim = ssim(tmPred, tmGt, mask);
    report.validPixelCount = detail::countValid(predLinear, mask);
    report.scene = std::move(scene);
    report.lighting = std::move(lighting);
    return report;
}

// ---------------------------------------------------------------------------
// Leave-one-lighting-out folds.
// ---------------------------------------------------------------------------

struct SceneFold {
    std::string heldOut;
    std::vector<std::string> support;
};

/// One fold per lighting, in input order; the support set keeps the input
/// order of the remaining ids.
inline std::vector<SceneFold> leaveOneOutFolds(const std::vector<std::string>& ids) {
    if (ids.size() < 2)
        throw std::invalid_argument("leaveOneOutFolds: at least 2 lightings required");
    for (size_t i = 0; i < ids.size(); ++i)
        for (size_t j = i + 1; j < ids.size(); ++j)
            if (ids[i] == ids[j])
                throw std::invalid_argument("leaveOneOutFolds: duplicate lighting id '" +
                                            ids[i] + "'");
    std::vector<SceneFold> folds;
    folds.reserve(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        SceneFold fold;
        fold.heldOut = ids[i];
        for (size_t j = 0; j < ids.size(); ++j)
            if (j != i) fold.support.push_back(ids[j]);
        folds.push_back(std::move(fold));
    }
    return folds;
}

// ---------------------------------------------------------------------------
// Report serialization. One row per (scene, lighting) plus an aggregate row
// of means over the scored rows.
// ---------------------------------------------------------------------------

inline void writeMetricsCsv(const std::string& path,
                            const std::vector<MetricsReport>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("writeMetricsCsv '" + path + "': cannot open");
    os << "scene,lighting,alpha,alpha_degenerate,psnr_db,ssim,valid_pixels,lpips,lpips_reason\n";
    char line[512];
    double sumAlpha = 0.0, sumPsnr = 0.0, sumSsim = 0.0;
    for (const MetricsReport& r : rows) {
        std::snprintf(line, sizeof(line), "%s,%s,%.9g,%d,%.6f,%.6f,%zu,,%s\n",
                      r.scene.c_str(), r.lighting.c_str(), r.alpha,
                      r.alphaDegenerate ? 1 : 0, r.psnrDb, r.ssim, r.validPixelCount,
                      MetricsReport::kLpipsAbsentReason);
        os << line;
        sumAlpha += r.alpha;
        sumPsnr += r.psnrDb;
        sumSsim += r.ssim;
    }
    if (!rows.empty()) {
        const double n = static_cast<double>(rows.size());
        std::snprintf(line, sizeof(line), "aggregate,mean,%.9g,,%.6f,%.6f,,,\n",
                      sumAlpha / n, sumPsnr / n, sumSsim / n);
        os << line;
    }
}

inline void writeMetricsJson(const std::string& path,
                             const std::vector<MetricsReport>& rows) {
    nlohmann::json doc;
    doc["rows"] = nlohmann::json::array();
    double sumAlpha = 0.0, sumPsnr = 0.0, sumSsim = 0.0;
    for (const MetricsReport& r : rows) {
        doc["rows"].push_back({{"scene", r.scene},
                               {"lighting", r.lighting},
                               {"alpha", r.alpha},
                               {"alpha_degenerate", r.alphaDegenerate},
                               {"psnr_db", r.psnrDb},
                               {"ssim", r.ssim},
                               {"valid_pixels", r.validPixelCount},
                               {"lpips", nullptr},
                               {"lpips_reason", MetricsReport::kLpipsAbsentReason}});
        sumAlpha += r.alpha;
        sumPsnr += r.psnrDb;
        sumSsim += r.ssim;
    }
    if (!rows.empty()) {
        const double n = static_cast<double>(rows.size());
        doc["aggregate"] = {{"alpha", sumAlpha / n},
                            {"psnr_db", sumPsnr / n},
                            {"ssim", sumSsim / n}};
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("writeMetricsJson '" + path + "': cannot open");
    os << doc.dump(2) << "\n";
}

}  // namespace relight
