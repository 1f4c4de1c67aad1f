// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>

#include "relight/core.hpp"
#include "relight/envmap.hpp"
#include "relight/gbuffer.hpp"

namespace relight {

inline constexpr double kDielectricF0 = 0.04;

/// Schlick approximation F = F0 + (1 - F0)(1 - n.v)^5.
inline Rgb fresnelSchlick(double ndotv, const Rgb& f0) {
    if (!(ndotv >= 0.0 && ndotv <= 1.0))
        throw std::invalid_argument("fresnelSchlick: n.v must lie in [0,1]");
    for (int c = 0; c < 3; ++c)
        if (!(f0[c] >= 0.0 && f0[c] <= 1.0))
            throw std::invalid_argument("fresnelSchlick: F0 must lie in [0,1]");
    const double s = std::pow(1.0 - ndotv, 5.0);
    return Rgb(f0.r + (1.0 - f0.r) * s, f0.g + (1.0 - f0.g) * s, f0.b + (1.0 - f0.b) * s);
}

/// Mirror reflection r = 2(n.v)n - v for a front-facing configuration.
inline Vec3 reflectDir(const Vec3& n, const Vec3& v) {
    checkUnit(n, "reflectDir normal");
    checkUnit(v, "reflectDir view");
    const double ndotv = n.dot(v);
    if (ndotv <= 0.0)
        throw std::invalid_argument("reflectDir: back-facing (n.v <= 0)");
    return n * (2.0 * ndotv) - v;
}

/// Forward split-sum shading decomposed into its energy terms. `image` is the
/// non-negative clamp of diffuse + specular; the two component planes keep
/// their raw (pre-clamp) values so the split sums exactly.
struct RenderOutput {
    LinearImage image;
    LinearImage diffuse;
    LinearImage specular;
    Mask backFacing;  // true where n.v <= 0 (rendered black, no gradients)
};

namespace detail {

struct PixelShade {
    Rgb preClamp;
    Rgb diffuse;
    Rgb specular;
    bool backFacing = false;
};

inline PixelShade shadePixel(const Rgb& basecolor, const Vec3& rawNormal,
                             double roughness, double metallic, const Vec3& view,
                             const EnvAssets& assets) {
    PixelShade out;
    const Vec3 n = rawNormal.normalized();
    const double ndotv = n.dot(view);
    if (ndotv <= 0.0) {
        out.backFacing = true;
        return out;
    }
    Rgb f0;
    for (int c = 0; c < 3; ++c)
        f0[c] = kDielectricF0 * (1.0 - metallic) + basecolor[c] * metallic;
    const Rgb fresnel = fresnelSchlick(std::min(ndotv, 1.0), f0);
    const Rgb eDiff = shIrradiance(assets.sh, n);
    const Vec3 r = n * (2.0 * ndotv) - view;
    const Rgb eSpec = sampleSpecular(assets.prefiltered, r.normalized(), roughness);
    for (int c = 0; c < 3; ++c) {
        out.diffuse[c] = (1.0 - metallic) * (1.0 - fresnel[c]) * basecolor[c] * eDiff[c];
        out.specular[c] = fresnel[c] * eSpec[c];
        out.preClamp[c] = out.diffuse[c] + out.specular[c];
    }
    return out;
}

}  // namespace detail

inline RenderOutput renderForwardFull(const GBuffer& g, const EnvAssets& assets,
                                      const ViewSetup& view) {
    g.validate(/*normalTolerance=*/0.5);
    if (!view.compatibleWith(g.width, g.height))
        throw std::invalid_argument("renderForwardFull: view/G-buffer shape mismatch");
    RenderOutput out{LinearImage(g.width, g.height), LinearImage(g.width, g.height),
                     LinearImage(g.width, g.height), Mask(g.width, g.height, false)};
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            const size_t i = static_cast<size_t>(y) * g.width + x;
            const detail::PixelShade s = detail::shadePixel(
                g.basecolor[i], g.normal[i], g.roughness[i], g.metallic[i],
                view.at(x, y), assets);
            if (s.backFacing) {
                out.backFacing.set(x, y, true);
                continue;
            }
            out.diffuse.pixels()[i] = s.diffuse;
            out.specular.pixels()[i] = s.specular;
            for (int c = 0; c < 3; ++c)
                out.image.pixels()[i][c] = std::fmax(s.preClamp[c], 0.0);
        }
    }
    return out;
}

inline LinearImage renderForward(const GBuffer& g, const EnvAssets& assets,
                                 const ViewSetup& view) {
    return renderForwardFull(g, assets, view).image;
}

/// Reverse-mode derivatives of the forward shading w.r.t. every G-buffer
/// field. `lossGrad` carries dLoss/dL_o per pixel and channel. The clamp uses
/// subgradient 0 on its clamped branch; normal gradients are projected
/// through the normalization Jacobian onto the stored vector.
inline GBufferGradients renderBackward(const GBuffer& g, const EnvAssets& assets,
                                       const ViewSetup& view,
                                       const LinearImage& lossGrad) {
    g.validate(/*normalTolerance=*/0.5);
    if (lossGrad.width() != g.width || lossGrad.height() != g.height)
        throw std::invalid_argument("renderBackward: adjoint shape mismatch");
    if (!view.compatibleWith(g.width, g.height))
        throw std::invalid_argument("renderBackward: view/G-buffer shape mismatch");

    GBufferGradients grad(g.width, g.height);
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
            const size_t i = static_cast<size_t>(y) * g.width + x;
            const Vec3 rawNormal = g.normal[i];
            const double rawLen = rawNormal.norm();
            const Vec3 n = rawNormal / rawLen;
            const Vec3 v = view.at(x, y);
            const double ndotv = n.dot(v);
            if (ndotv <= 0.0) continue;

            const Rgb& cb = g.basecolor[i];
            const double m = g.metallic[i];
            Rgb f0;
            for (int c = 0; c < 3; ++c)
                f0[c] = kDielectricF0 * (1.0 - m) + cb[c] * m;
            const double oneMinus = 1.0 - std::min(ndotv, 1.0);
            const double s = std::pow(oneMinus, 5.0);
            Rgb fresnel;
            for (int c = 0; c < 3; ++c) fresnel[c] = f0[c] + (1.0 - f0[c]) * s;

            const IrradianceSample ed = shIrradianceGrad(assets.sh, n);
            const Vec3 r = n * (2.0 * ndotv) - v;
            const SpecularSample es =
                sampleSpecularGrad(assets.prefiltered, r.normalized(), g.roughness[i]);

            // Clamp gate per channel.
            Rgb gate;
            for (int c = 0; c < 3; ++c) {
                const double preClamp = (1.0 - m) * (1.0 - fresnel[c]) * cb[c] * ed.value[c] +
                                        fresnel[c] * es.value[c];
                gate[c] = preClamp >= 0.0 ? lossGrad.at(x, y)[c] : 0.0;
            }

            Rgb dF, dF0, dCb, dEd, dEs;
            double dS = 0.0, dM = 0.0, dAlpha = 0.0, dNdotv = 0.0;
            Vec3 dR, dN;
            for (int c = 0; c < 3; ++c) {
                dF[c] = gate[c] * (es.value[c] - (1.0 - m) * cb[c] * ed.value[c]);
                dF0[c] = dF[c] * (1.0 - s);
                dS += dF[c] * (1.0 - f0[c]);
                dCb[c] = gate[c] * (1.0 - m) * (1.0 - fresnel[c]) * ed.value[c] + dF0[c] * m;
                dM += -gate[c] * (1.0 - fresnel[c]) * cb[c] * ed.value[c] +
                      dF0[c] * (cb[c] - kDielectricF0);
                dEd[c] = gate[c] * (1.0 - m) * (1.0 - fresnel[c]) * cb[c];
                dEs[c] = gate[c] * fresnel[c];
                dAlpha += dEs[c] * es.dRoughness[c];
                dR += es.dDir[c] * dEs[c];
                dN += ed.dNormal[c] * dEd[c];
            }
            dNdotv += dS * (-5.0 * std::pow(oneMinus, 4.0));

            // r = 2(n.v)n - v: pull the reflection adjoint back onto n.
            dN += v * (2.0 * dR.dot(n)) + dR * (2.0 * ndotv);
            dN += v * dNdotv;

            // Through the normalization Jacobian (I - n n^T)/|raw|.
            const Vec3 projected = (dN - n * dN.dot(n)) / rawLen;

            grad.basecolor[i] = dCb;
            grad.normal[i] = projected;
            grad.roughness[i] = dAlpha;
            grad.metallic[i] = dM;
        }
    }
    return grad;
}

}  // namespace relight
