// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "relight/core.hpp"

namespace relight {

// Equirectangular convention, used identically by every module:
//   +Y is up. Polar angle theta in [0,pi] is measured from +Y and maps to
//   rows top to bottom. Azimuth phi in [0,2pi), measured from +X toward +Z,
//   maps to columns left to right. Pixel centers sit at half-integer
//   coordinates. Rows wrap nowhere; columns wrap modulo the width.

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Equirectangular radiance map, width = 2 * height.
class EnvironmentMap {
  public:
    EnvironmentMap() = default;
    explicit EnvironmentMap(LinearImage image) : image_(std::move(image)) {
        image_.validate("EnvironmentMap");
        if (image_.width() != 2 * image_.height())
            throw std::invalid_argument("EnvironmentMap: width must equal 2 * height");
    }

    int width() const { return image_.width(); }
    int height() const { return image_.height(); }
    const LinearImage& image() const { return image_; }

  private:
    LinearImage image_;
};

struct PixelCoord {
    int x = 0;
    int y = 0;
};

inline void checkUnit(const Vec3& d, const char* what) {
    const double n = d.norm();
    if (std::fabs(n - 1.0) > 1e-6)
        throw std::invalid_argument(std::string(what) + ": direction must be unit length");
}

/// Direction of the center of texel (x, y).
inline Vec3 pixelToDirection(int x, int y, int width, int height) {
    if (x < 0 || x >= width || y < 0 || y >= height)
        throw std::invalid_argument("pixelToDirection: pixel out of bounds");
    const double theta = kPi * (y + 0.5) / height;
    const double phi = kTwoPi * (x + 0.5) / width;
    const double st = std::sin(theta);
    return {st * std::cos(phi), std::cos(theta), st * std::sin(phi)};
}

/// Continuous texel-space coordinates: u in [0, width), v in [0, height].
/// floor(u), floor(v) index the containing texel.
inline void directionToContinuous(const Vec3& dir, int width, int height,
                                  double* u, double* v) {
    checkUnit(dir, "directionToContinuous");
    const double theta = std::acos(std::clamp(dir.y, -1.0, 1.0));
    double phi = std::atan2(dir.z, dir.x);
    if (phi < 0.0) phi += kTwoPi;
    *u = phi / kTwoPi * width;
    *v = theta / kPi * height;
}

/// Texel containing the given direction.
inline PixelCoord directionToPixel(const Vec3& dir, int width, int height) {
    double u, v;
    directionToContinuous(dir, width, height, &u, &v);
    PixelCoord p;
    p.x = std::clamp(static_cast<int>(std::floor(u)), 0, width - 1);
    p.y = std::clamp(static_cast<int>(std::floor(v)), 0, height - 1);
    return p;
}

/// Solid angle subtended by any texel in row y: (2pi/W)(pi/H) sin(theta).
inline double texelSolidAngle(int y, int width, int height) {
    const double theta = kPi * (y + 0.5) / height;
    return (kTwoPi / width) * (kPi / height) * std::sin(theta);
}

// ---------------------------------------------------------------------------
// Bilinear equirect lookup (wrap in azimuth, clamp at the poles) and its
// derivative with respect to the query direction.
// ---------------------------------------------------------------------------

namespace detail {

inline int wrapX(int x, int w) {
    const int m = x % w;
    return m < 0 ? m + w : m;
}

struct BilinearTaps {
    Rgb t00, t10, t01, t11;  // (x0,y0) (x1,y0) (x0,y1) (x1,y1)
    double fx = 0.0, fy = 0.0;
};

inline BilinearTaps bilinearTaps(const LinearImage& img, double u, double v) {
    const int w = img.width();
    const int h = img.height();
    const double ub = u - 0.5;
    const double vb = v - 0.5;
    const int x0 = static_cast<int>(std::floor(ub));
    const int y0 = static_cast<int>(std::floor(vb));
    BilinearTaps taps;
    taps.fx = ub - x0;
    taps.fy = vb - y0;
    const int x0w = wrapX(x0, w);
    const int x1w = wrapX(x0 + 1, w);
    const int y0c = std::clamp(y0, 0, h - 1);
    const int y1c = std::clamp(y0 + 1, 0, h - 1);
    taps.t00 = img.at(x0w, y0c);
    taps.t10 = img.at(x1w, y0c);
    taps.t01 = img.at(x0w, y1c);
    taps.t11 = img.at(x1w, y1c);
    return taps;
}

inline Rgb bilinearMix(const BilinearTaps& t) {
    const Rgb top = t.t00 * (1.0 - t.fx) + t.t10 * t.fx;
    const Rgb bot = t.t01 * (1.0 - t.fx) + t.t11 * t.fx;
    return top * (1.0 - t.fy) + bot * t.fy;
}

}  // namespace detail

inline Rgb bilinearLookup(const LinearImage& img, const Vec3& dir) {
    double u, v;
    directionToContinuous(dir, img.width(), img.height(), &u, &v);
    return detail::bilinearMix(detail::bilinearTaps(img, u, v));
}

/// Bilinear lookup plus the Jacobian of each channel w.r.t. the direction.
struct DirectionalSample {
    Rgb value;
    Vec3 dDir[3];  // gradient of value[c] w.r.t. the (unit) query direction
};

inline DirectionalSample bilinearLookupGrad(const LinearImage& img, const Vec3& dir) {
    const int w = img.width();
    const int h = img.height();
    double u, v;
    directionToContinuous(dir, w, h, &u, &v);
    const detail::BilinearTaps t = detail::bilinearTaps(img, u, v);

    DirectionalSample out;
    out.value = detail::bilinearMix(t);

    // Partials of the interpolant w.r.t. continuous texel coordinates.
    const Rgb dRdu = (t.t10 - t.t00) * (1.0 - t.fy) + (t.t11 - t.t01) * t.fy;
    const Rgb dRdv = (t.t01 - t.t00) * (1.0 - t.fx) + (t.t11 - t.t10) * t.fx;

    // u = phi/(2pi) * W, v = theta/pi * H.
    const double planar = std::max(dir.x * dir.x + dir.z * dir.z, 1e-12);
    const Vec3 dPhi(-dir.z / planar, 0.0, dir.x / planar);
    const double sinTheta = std::sqrt(std::max(1.0 - dir.y * dir.y, 1e-12));
    const Vec3 dTheta(0.0, -1.0 / sinTheta, 0.0);
    const Vec3 dU = dPhi * (w / kTwoPi);
    const Vec3 dV = dTheta * (h / kPi);

    for (int c = 0; c < 3; ++c)
        out.dDir[c] = dU * dRdu[c] + dV * dRdv[c];
    return out;
}

// ---------------------------------------------------------------------------
// Spherical harmonics: order-2 projection and clamped-cosine irradiance.
// ---------------------------------------------------------------------------

/// 9 coefficients (bands 0..2) per color channel, in (l,m) order
/// (0,0) (1,-1) (1,0) (1,1) (2,-2) (2,-1) (2,0) (2,1) (2,2).
struct ShCoefficients {
    std::array<Rgb, 9> c{};

    void validate() const {
        for (const Rgb& v : c)
            if (!v.isFinite())
                throw std::invalid_argument("ShCoefficients: non-finite coefficient");
    }
};

namespace detail {

inline constexpr double kShK1 = 0.4886025119029199;    // sqrt(3/(4pi))
inline constexpr double kShK2 = 1.0925484305920792;    // sqrt(15/(4pi))
inline constexpr double kShK20 = 0.31539156525252005;  // sqrt(5/(16pi))
inline constexpr double kShK22 = 0.5462742152960396;   // sqrt(15/(16pi))

inline std::array<double, 9> evalSh9(const Vec3& d) {
    return {0.28209479177387814,
            kShK1 * d.y,
            kShK1 * d.z,
            kShK1 * d.x,
            kShK2 * d.x * d.y,
            kShK2 * d.y * d.z,
            kShK20 * (3.0 * d.z * d.z - 1.0),
            kShK2 * d.x * d.z,
            kShK22 * (d.x * d.x - d.y * d.y)};
}

inline std::array<Vec3, 9> evalSh9Grad(const Vec3& d) {
    return {Vec3(0, 0, 0),
            Vec3(0, kShK1, 0),
            Vec3(0, 0, kShK1),
            Vec3(kShK1, 0, 0),
            Vec3(kShK2 * d.y, kShK2 * d.x, 0),
            Vec3(0, kShK2 * d.z, kShK2 * d.y),
            Vec3(0, 0, 6.0 * kShK20 * d.z),
            Vec3(kShK2 * d.z, 0, kShK2 * d.x),
            Vec3(2.0 * kShK22 * d.x, -2.0 * kShK22 * d.y, 0)};
}

/// Clamped-cosine convolution factors per band, divided by pi so a constant
/// environment of radiance c evaluates to irradiance-style E = c.
inline constexpr std::array<double, 9> kCosineLobeOverPi = {
    1.0,
    2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0,
    0.25, 0.25, 0.25, 0.25, 0.25};

}  // namespace detail

/// Projects the environment onto SH bands 0..2 by direct quadrature:
/// c_lm = sum over texels of L * Y_lm(dir) * solidAngle.
inline ShCoefficients shProject(const EnvironmentMap& env) {
    const LinearImage& img = env.image();
    ShCoefficients sh;
    for (int y = 0; y < img.height(); ++y) {
        const double dOmega = texelSolidAngle(y, img.width(), img.height());
        for (int x = 0; x < img.width(); ++x) {
            const Vec3 dir = pixelToDirection(x, y, img.width(), img.height());
            const std::array<double, 9> basis = detail::evalSh9(dir);
            const Rgb& radiance = img.at(x, y);
            for (int i = 0; i < 9; ++i)
                sh.c[i] += radiance * (basis[i] * dOmega);
        }
    }
    return sh;
}

/// Diffuse irradiance for a unit normal:
/// E(n) = (1/pi) * integral of L(w) max(n.w, 0) dw, via the SH cosine lobe.
inline Rgb shIrradiance(const ShCoefficients& sh, const Vec3& n) {
    checkUnit(n, "shIrradiance");
    const std::array<double, 9> basis = detail::evalSh9(n);
    Rgb e;
    for (int i = 0; i < 9; ++i)
        e += sh.c[i] * (detail::kCosineLobeOverPi[i] * basis[i]);
    return e;
}

struct IrradianceSample {
    Rgb value;
    Vec3 dNormal[3];  // gradient of value[c] w.r.t. the (unit) normal
};

inline IrradianceSample shIrradianceGrad(const ShCoefficients& sh, const Vec3& n) {
    checkUnit(n, "shIrradianceGrad");
    const std::array<double, 9> basis = detail::evalSh9(n);
    const std::array<Vec3, 9> grad = detail::evalSh9Grad(n);
    IrradianceSample out;
    for (int i = 0; i < 9; ++i) {
        const double k = detail::kCosineLobeOverPi[i];
        out.value += sh.c[i] * (k * basis[i]);
        for (int c = 0; c < 3; ++c)
            out.dNormal[c] += grad[i] * (k * sh.c[i][c]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Roughness-mipped specular prefilter (split-sum lookup table).
// ---------------------------------------------------------------------------

inline constexpr int kPrefilterSampleCount = 256;

/// Mip chain over roughness: level l has roughness l/(levels-1) and half the
/// resolution of level l-1. Level 0 is an untouched copy of the source.
struct PrefilteredEnv {
    std::vector<LinearImage> levels;
    std::vector<double> levelRoughness;

    int levelCount() const { return static_cast<int>(levels.size()); }
};

namespace detail {

inline double radicalInverseBase2(uint32_t bits) {
    bits = (bits << 16u) | (bits >> 16u);
    bits = ((bits & 0x55555555u) << 1u) | ((bits & 0xAAAAAAAAu) >> 1u);
    bits = ((bits & 0x33333333u) << 2u) | ((bits & 0xCCCCCCCCu) >> 2u);
    bits = ((bits & 0x0F0F0F0Fu) << 4u) | ((bits & 0xF0F0F0F0u) >> 4u);
    bits = ((bits & 0x00FF00FFu) << 8u) | ((bits & 0xFF00FF00u) >> 8u);
    return static_cast<double>(bits) * 2.3283064365386963e-10;  // 2^-32
}

inline void hammersley(uint32_t i, uint32_t n, double* u1, double* u2) {
    *u1 = static_cast<double>(i) / static_cast<double>(n);
    *u2 = radicalInverseBase2(i);
}

/// Deterministic orthonormal frame around a unit vector.
inline void orthonormalBasis(const Vec3& n, Vec3* t, Vec3* b) {
    const double sign = n.z >= 0.0 ? 1.0 : -1.0;
    const double a = -1.0 / (sign + n.z);
    const double c = n.x * n.y * a;
    *t = Vec3(1.0 + sign * n.x * n.x * a, sign * c, -sign * n.x);
    *b = Vec3(c, sign + n.y * n.y * a, -n.y);
}

/// GGX half-vector importance sample in the frame of n. Returns the
/// half-vector and writes cos(theta_h) for pdf evaluation.
inline Vec3 ggxSampleHalfVector(double u1, double u2, double alpha, const Vec3& n,
                                const Vec3& t, const Vec3& b, double* cosThetaH) {
    const double a2 = alpha * alpha;
    const double phi = kTwoPi * u1;
    const double cosTheta = std::sqrt((1.0 - u2) / (1.0 + (a2 - 1.0) * u2));
    const double sinTheta = std::sqrt(std::max(0.0, 1.0 - cosTheta * cosTheta));
    *cosThetaH = cosTheta;
    const Vec3 local(sinTheta * std::cos(phi), sinTheta * std::sin(phi), cosTheta);
    return t * local.x + b * local.y + n * local.z;
}

inline double ggxNdf(double cosThetaH, double alpha) {
    const double a2 = alpha * alpha;
    const double d = cosThetaH * cosThetaH * (a2 - 1.0) + 1.0;
    return a2 / (kPi * d * d);
}

/// Solid-angle-weighted 2x2 reductions of the source, mip 0 = source itself.
/// Lets prefilter samples read a footprint matched to their pdf instead of a
/// point value, which keeps spiky environments' energy in the estimate.
struct SpherePyramid {
    std::vector<LinearImage> mips;
};

inline SpherePyramid buildSpherePyramid(const LinearImage& src) {
    SpherePyramid pyr;
    pyr.mips.push_back(src);
    while (pyr.mips.back().height() >= 2 && pyr.mips.back().width() >= 2) {
        const LinearImage& fine = pyr.mips.back();
        const int w = fine.width() / 2;
        const int h = std::max(fine.height() / 2, 1);
        LinearImage coarse(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                Rgb acc;
                double wsum = 0.0;
                for (int dy = 0; dy < 2; ++dy) {
                    const int fy = std::min(2 * y + dy, fine.height() - 1);
                    const double ws = texelSolidAngle(fy, fine.width(), fine.height());
                    for (int dx = 0; dx < 2; ++dx) {
                        acc += fine.at(2 * x + dx, fy) * ws;
                        wsum += ws;
                    }
                }
                coarse.at(x, y) = acc / wsum;
            }
        }
        pyr.mips.push_back(std::move(coarse));
        if (h == 1) break;
    }
    return pyr;
}

inline Rgb pyramidLookup(const SpherePyramid& pyr, const Vec3& dir, double mip) {
    const int top = static_cast<int>(pyr.mips.size()) - 1;
    const double m = std::clamp(mip, 0.0, static_cast<double>(top));
    const int m0 = static_cast<int>(std::floor(m));
    const int m1 = std::min(m0 + 1, top);
    const double f = m - m0;
    const Rgb lo = bilinearLookup(pyr.mips[m0], dir);
    if (f == 0.0) return lo;
    const Rgb hi = bilinearLookup(pyr.mips[m1], dir);
    return lo * (1.0 - f) + hi * f;
}

}  // namespace detail

/// GGX-importance-weighted average of source radiance about each texel's
/// direction, one fixed Hammersley point set per texel. The view direction is
/// taken equal to the texel normal (standard split-sum collapse).
inline PrefilteredEnv prefilterEnv(const EnvironmentMap& env, int levels) {
    if (levels < 2)
        throw std::invalid_argument("prefilterEnv: at least 2 levels required");
    if (env.height() < (1 << (levels - 1)))
        throw std::invalid_argument("prefilterEnv: environment too small for level count");

    PrefilteredEnv pre;
    pre.levels.reserve(levels);
    pre.levelRoughness.reserve(levels);
    pre.levels.push_back(env.image());
    pre.levelRoughness.push_back(0.0);

    const detail::SpherePyramid pyramid = detail::buildSpherePyramid(env.image());
    for (int level = 1; level < levels; ++level) {
        const int w = env.width() >> level;
        const int h = env.height() >> level;
        const double alpha = static_cast<double>(level) / (levels - 1);
        LinearImage dst(w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const Vec3 n = pixelToDirection(x, y, w, h);
                Vec3 t, b;
                detail::orthonormalBasis(n, &t, &b);
                Rgb acc;
                double weight = 0.0;
                for (uint32_t s = 0; s < kPrefilterSampleCount; ++s) {
                    double u1, u2, cosThetaH;
                    detail::hammersley(s, kPrefilterSampleCount, &u1, &u2);
                    const Vec3 hv = detail::ggxSampleHalfVector(u1, u2, alpha, n, t, b,
                                                                &cosThetaH);
                    const Vec3 l = (hv * (2.0 * n.dot(hv)) - n).normalized();
                    const double ndotl = n.dot(l);
                    if (ndotl <= 0.0) continue;
                    // Footprint-matched fetch: match the sample's solid angle
                    // (1 / (N * pdf), pdf = D/4 with v = n) against the texel
                    // solid angle at the hit latitude.
                    const double pdf =
                        std::max(detail::ggxNdf(cosThetaH, alpha) / 4.0, 1e-12);
                    const double sampleOmega = 1.0 / (kPrefilterSampleCount * pdf);
                    const double sinThetaL =
                        std::max(std::sqrt(std::max(1.0 - l.y * l.y, 0.0)), 1e-4);
                    const double texelOmega =
                        (kTwoPi / env.width()) * (kPi / env.height()) * sinThetaL;
                    const double mip = std::max(0.0, 0.5 * std::log2(sampleOmega / texelOmega));
                    acc += detail::pyramidLookup(pyramid, l, mip) * ndotl;
                    weight += ndotl;
                }
                dst.at(x, y) = weight > 0.0 ? acc / weight : bilinearLookup(env.image(), n);
            }
        }
        pre.levels.push_back(std::move(dst));
        pre.levelRoughness.push_back(alpha);
    }
    return pre;
}

namespace detail {

/// Level bracket for a roughness query. Exact integer breakpoints resolve to
/// the lower-side bracket so the one-sided derivative comes from below.
inline void levelBracket(double roughness, int levels, int* l0, double* frac) {
    const double g = roughness * (levels - 1);
    if (g <= 0.0) {
        *l0 = 0;
        *frac = 0.0;
        return;
    }
    const double fl = std::floor(g);
    if (fl == g || fl >= levels - 1) {
        *l0 = std::min(static_cast<int>(fl), levels - 1) - 1;
        *frac = g - *l0;
    } else {
        *l0 = static_cast<int>(fl);
        *frac = g - fl;
    }
}

}  // namespace detail

/// Trilinear split-sum lookup: bilinear inside the two levels bracketing
/// roughness * (levels - 1), linear across them.
inline Rgb sampleSpecular(const PrefilteredEnv& pre, const Vec3& r, double roughness) {
    checkUnit(r, "sampleSpecular");
    if (!(roughness >= 0.0 && roughness <= 1.0))
        throw std::invalid_argument("sampleSpecular: roughness must lie in [0,1]");
    int l0;
    double f;
    detail::levelBracket(roughness, pre.levelCount(), &l0, &f);
    const Rgb lo = bilinearLookup(pre.levels[l0], r);
    if (f == 0.0) return lo;
    const Rgb hi = bilinearLookup(pre.levels[l0 + 1], r);
    return lo * (1.0 - f) + hi * f;
}

struct SpecularSample {
    Rgb value;
    Rgb dRoughness;  // per-channel derivative w.r.t. roughness
    Vec3 dDir[3];    // gradient of value[c] w.r.t. the reflection direction
};

inline SpecularSample sampleSpecularGrad(const PrefilteredEnv& pre, const Vec3& r,
                                         double roughness) {
    checkUnit(r, "sampleSpecularGrad");
    if (!(roughness >= 0.0 && roughness <= 1.0))
        throw std::invalid_argument("sampleSpecularGrad: roughness must lie in [0,1]");
    int l0;
    double f;
    detail::levelBracket(roughness, pre.levelCount(), &l0, &f);
    const DirectionalSample lo = bilinearLookupGrad(pre.levels[l0], r);
    const DirectionalSample hi = bilinearLookupGrad(pre.levels[l0 + 1], r);

    SpecularSample out;
    const double levelScale = pre.levelCount() - 1;
    out.value = lo.value * (1.0 - f) + hi.value * f;
    out.dRoughness = (hi.value - lo.value) * levelScale;
    for (int c = 0; c < 3; ++c)
        out.dDir[c] = lo.dDir[c] * (1.0 - f) + hi.dDir[c] * f;
    return out;
}

// ---------------------------------------------------------------------------
// Bundled assets and the versioned binary cache keyed by source content.
// ---------------------------------------------------------------------------

struct EnvAssets {
    EnvironmentMap source;
    ShCoefficients sh;
    PrefilteredEnv prefiltered;
    uint64_t contentHash = 0;
    int prefilterSamples = kPrefilterSampleCount;
};

inline uint64_t envContentHash(const EnvironmentMap& env) {
    const LinearImage& img = env.image();
    const int dims[2] = {img.width(), img.height()};
    uint64_t h = detail::fnv1a64(dims, sizeof(dims));
    return detail::fnv1a64(img.pixels().data(), img.pixelCount() * sizeof(Rgb), h);
}

inline EnvAssets buildEnvAssets(const EnvironmentMap& env, int levels) {
    EnvAssets assets;
    assets.source = env;
    assets.sh = shProject(env);
    assets.prefiltered = prefilterEnv(env, levels);
    assets.contentHash = envContentHash(env);
    return assets;
}

namespace detail {

inline constexpr uint32_t kEnvAssetsMagic = 0x524C4556;  // "RLEV"
inline constexpr uint32_t kEnvAssetsVersion = 1;

template <typename T>
void writePod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void readPod(std::istream& is, T* v) {
    is.read(reinterpret_cast<char*>(v), sizeof(T));
    if (!is) throw std::runtime_error("EnvAssets cache: truncated file");
}

inline void writeImage(std::ostream& os, const LinearImage& img) {
    writePod(os, static_cast<uint32_t>(img.width()));
    writePod(os, static_cast<uint32_t>(img.height()));
    os.write(reinterpret_cast<const char*>(img.pixels().data()),
             static_cast<std::streamsize>(img.pixelCount() * sizeof(Rgb)));
}

inline LinearImage readImage(std::istream& is) {
    uint32_t w, h;
    readPod(is, &w);
    readPod(is, &h);
    LinearImage img(static_cast<int>(w), static_cast<int>(h));
    is.read(reinterpret_cast<char*>(img.pixels().data()),
            static_cast<std::streamsize>(img.pixelCount() * sizeof(Rgb)));
    if (!is) throw std::runtime_error("EnvAssets cache: truncated pixel data");
    return img;
}

}  // namespace detail

inline void saveEnvAssets(const std::string& path, const EnvAssets& assets) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("saveEnvAssets '" + path + "': cannot open");
    detail::writePod(os, detail::kEnvAssetsMagic);
    detail::writePod(os, detail::kEnvAssetsVersion);
    detail::writePod(os, assets.contentHash);
    detail::writePod(os, static_cast<uint32_t>(assets.prefilterSamples));
    detail::writeImage(os, assets.source.image());
    for (const Rgb& c : assets.sh.c) detail::writePod(os, c);
    detail::writePod(os, static_cast<uint32_t>(assets.prefiltered.levelCount()));
    for (int l = 0; l < assets.prefiltered.levelCount(); ++l) {
        detail::writePod(os, assets.prefiltered.levelRoughness[l]);
        detail::writeImage(os, assets.prefiltered.levels[l]);
    }
    if (!os) throw std::runtime_error("saveEnvAssets '" + path + "': write failed");
}

inline EnvAssets loadEnvAssets(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("loadEnvAssets '" + path + "': cannot open");
    uint32_t magic, version, samples;
    detail::readPod(is, &magic);
    if (magic != detail::kEnvAssetsMagic)
        throw std::runtime_error("loadEnvAssets '" + path + "': bad magic");
    detail::readPod(is, &version);
    if (version != detail::kEnvAssetsVersion)
        throw std::runtime_error("loadEnvAssets '" + path + "': unsupported version");
    EnvAssets assets;
    detail::readPod(is, &assets.contentHash);
    detail::readPod(is, &samples);
    assets.prefilterSamples = static_cast<int>(samples);
    assets.source = EnvironmentMap(detail::readImage(is));
    for (Rgb& c : assets.sh.c) detail::readPod(is, &c);
    uint32_t levels;
    detail::readPod(is, &levels);
    for (uint32_t l = 0; l < levels; ++l) {
        double rough;
        detail::readPod(is, &rough);
        assets.prefiltered.levelRoughness.push_back(rough);
        assets.prefiltered.levels.push_back(detail::readImage(is));
    }
    if (assets.prefiltered.levelCount() < 2)
        throw std::runtime_error("loadEnvAssets '" + path + "': fewer than 2 levels");
    return assets;
}

}  // namespace relight
