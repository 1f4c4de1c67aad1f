// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

#include "relight/envmap.hpp"
#include "relight/random.hpp"
#include "test_support.hpp"

using namespace relight;

namespace {

EnvironmentMap constantEnv(int width, double value) {
    return EnvironmentMap(LinearImage(width, width / 2, Rgb(value)));
}

EnvironmentMap singleTexelEnv(int width, int x, int y, double value) {
    LinearImage img(width, width / 2, Rgb(0.0));
    img.at(x, y) = Rgb(value);
    return EnvironmentMap(std::move(img));
}

double totalPower(const EnvironmentMap& env, int channel = 0) {
    double sum = 0.0;
    const LinearImage& img = env.image();
    for (int y = 0; y < img.height(); ++y) {
        const double dOmega = texelSolidAngle(y, img.width(), img.height());
        for (int x = 0; x < img.width(); ++x) sum += img.at(x, y)[channel] * dOmega;
    }
    return sum;
}

double levelPower(const LinearImage& level, int channel = 0) {
    double sum = 0.0;
    for (int y = 0; y < level.height(); ++y) {
        const double dOmega = texelSolidAngle(y, level.width(), level.height());
        for (int x = 0; x < level.width(); ++x) sum += level.at(x, y)[channel] * dOmega;
    }
    return sum;
}

/// Rotate a direction by +90 degrees of azimuth (phi -> phi + pi/2).
Vec3 rotate90AboutUp(const Vec3& d) { return {-d.z, d.y, d.x}; }

}  // namespace

TEST_CASE("environment map enforces the 2:1 equirect invariant", "[envmap]") {
    CHECK_THROWS_AS(EnvironmentMap(LinearImage(10, 6)), std::invalid_argument);
    LinearImage neg(8, 4, Rgb(1.0));
    neg.at(0, 0).b = -1.0;
    CHECK_THROWS_AS(EnvironmentMap(std::move(neg)), std::invalid_argument);
}

TEST_CASE("equirect poles and azimuth origin land on the convention", "[envmap]") {
    const int w = 16, h = 8;
    const PixelCoord top = directionToPixel(Vec3(0, 1, 0), w, h);
    CHECK(top.y == 0);
    const PixelCoord bottom = directionToPixel(Vec3(0, -1, 0), w, h);
    CHECK(bottom.y == h - 1);

    const PixelCoord px = directionToPixel(Vec3(1, 0, 0), w, h);
    CHECK(px.x == 0);
    CHECK(px.y == h / 2);

    // Quarter turn toward +Z lands a quarter of the width to the right.
    const PixelCoord pz = directionToPixel(Vec3(0, 0, 1), w, h);
    CHECK(pz.x == w / 4);
}

TEST_CASE("equirect round trip stays within one texel of angle", "[envmap]") {
    const int w = 64, h = 32;
    DeterministicRng rng(41);
    const double bound = kTwoPi / w;
    for (int i = 0; i < 10000; ++i) {
        const Vec3 d = rng.unitVector();
        const PixelCoord p = directionToPixel(d, w, h);
        const Vec3 back = pixelToDirection(p.x, p.y, w, h);
        REQUIRE(testutil::angleBetween(d, back) < bound);
    }
}

TEST_CASE("equirect mapping rejects invalid queries", "[envmap]") {
    CHECK_THROWS_AS(directionToPixel(Vec3(0, 2, 0), 16, 8), std::invalid_argument);
    CHECK_THROWS_AS(pixelToDirection(16, 0, 16, 8), std::invalid_argument);
    CHECK_THROWS_AS(pixelToDirection(0, -1, 16, 8), std::invalid_argument);
}

TEST_CASE("constant environment projects onto band zero only", "[envmap]") {
    const double c = 0.75;
    const ShCoefficients sh = shProject(constantEnv(64, c));
    const double expected = c * 2.0 * std::sqrt(kPi);
    CHECK_THAT(sh.c[0].r, Catch::Matchers::WithinRel(expected, 1e-3));
    CHECK_THAT(sh.c[0].g, Catch::Matchers::WithinRel(expected, 1e-3));
    for (int i = 1; i < 9; ++i)
        CHECK_THAT(sh.c[i].r, Catch::Matchers::WithinAbs(0.0, 1e-3 * expected));
}

TEST_CASE("planted band-1 coefficient is recovered by projection", "[envmap]") {
    // Y_(1,0) alone would be negative on half the sphere, so plant it on a
    // constant pedestal and recover the band-1 amplitude.
    const int w = 64, h = 32;
    const double pedestal = 1.0, amplitude = 0.5;
    LinearImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Vec3 d = pixelToDirection(x, y, w, h);
            img.at(x, y) = Rgb(pedestal + amplitude * detail::kShK1 * d.z);
        }
    const ShCoefficients sh = shProject(EnvironmentMap(std::move(img)));
    CHECK_THAT(sh.c[2].r, Catch::Matchers::WithinAbs(amplitude, 1e-2));
    for (int i : {1, 3, 4, 5, 6, 7, 8})
        CHECK_THAT(sh.c[i].r, Catch::Matchers::WithinAbs(0.0, 1e-2));
}

TEST_CASE("single-texel projection is the exact one-term quadrature", "[envmap]") {
    const int w = 16, h = 8, tx = 5, ty = 3;
    const double value = 12.0;
    const ShCoefficients sh = shProject(singleTexelEnv(w, tx, ty, value));
    const Vec3 d = pixelToDirection(tx, ty, w, h);
    const double dOmega = texelSolidAngle(ty, w, h);
    const auto basis = detail::evalSh9(d);
    for (int i = 0; i < 9; ++i)
        CHECK_THAT(sh.c[i].r, Catch::Matchers::WithinRel(value * basis[i] * dOmega, 1e-12));
}

TEST_CASE("constant environment yields constant irradiance", "[envmap]") {
    const double c = 2.5;
    const ShCoefficients sh = shProject(constantEnv(64, c));
    DeterministicRng rng(42);
    for (int i = 0; i < 50; ++i) {
        const Rgb e = shIrradiance(sh, rng.unitVector());
        CHECK_THAT(e.r, Catch::Matchers::WithinRel(c, 1e-3));
    }
}

TEST_CASE("point-light irradiance matches the cosine quadrature oracle", "[envmap]") {
    const int w = 32, h = 16, tx = 9, ty = 8;
    const EnvironmentMap env = singleTexelEnv(w, tx, ty, 40.0);
    const ShCoefficients sh = shProject(env);
    const Vec3 light = pixelToDirection(tx, ty, w, h);

    Vec3 t, b;
    detail::orthonormalBasis(light, &t, &b);
    // Offsets where the order-2 cosine kernel tracks the true clamped cosine.
    for (double cosGamma : {0.80, 0.82, 0.85}) {
        const double sinGamma = std::sqrt(1.0 - cosGamma * cosGamma);
        for (double azimuth : {0.0, 1.3, 2.9, 4.4}) {
            const Vec3 n = (light * cosGamma +
                            (t * std::cos(azimuth) + b * std::sin(azimuth)) * sinGamma)
                               .normalized();
            const Rgb oracle = testutil::bruteForceIrradiance(env, n);
            const Rgb e = shIrradiance(sh, n);
            REQUIRE_THAT(e.r, Catch::Matchers::WithinRel(oracle.r, 0.02));
        }
    }
}

TEST_CASE("irradiance leakage from the opposite hemisphere is band-limited",
          "[envmap]") {
    // All radiance strictly below the horizon; the true integral at +Y is zero
    // and the order-2 kernel bounds the residual by 0.1 * power / pi.
    const int w = 32, h = 16;
    LinearImage img(w, h, Rgb(0.0));
    DeterministicRng rng(43);
    for (int y = h / 2; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = Rgb(rng.uniform(0.5, 2.0));
    const EnvironmentMap env(std::move(img));

    const Vec3 n(0, 1, 0);
    const Rgb oracle = testutil::bruteForceIrradiance(env, n);
    REQUIRE(oracle.r == 0.0);

    const Rgb leak = shIrradiance(shProject(env), n);
    const double bound = 0.1 * totalPower(env) / kPi;
    CHECK(std::fabs(leak.r) <= bound);
}

TEST_CASE("irradiance is linear in the environment", "[envmap]") {
    const EnvironmentMap e1 = testutil::randomSmoothEnv(32, 16, 44);
    const EnvironmentMap e2 = testutil::randomSmoothEnv(32, 16, 45);
    const double a = 1.7, b = 0.4;
    LinearImage mixed(32, 16);
    for (size_t i = 0; i < mixed.pixelCount(); ++i)
        mixed.pixels()[i] = e1.image().pixels()[i] * a + e2.image().pixels()[i] * b;

    const ShCoefficients shMixed = shProject(EnvironmentMap(std::move(mixed)));
    const ShCoefficients sh1 = shProject(e1);
    const ShCoefficients sh2 = shProject(e2);
    DeterministicRng rng(46);
    for (int i = 0; i < 20; ++i) {
        const Vec3 n = rng.unitVector();
        const Rgb lhs = shIrradiance(shMixed, n);
        const Rgb rhs = shIrradiance(sh1, n) * a + shIrradiance(sh2, n) * b;
        for (int c = 0; c < 3; ++c)
            CHECK_THAT(lhs[c], Catch::Matchers::WithinRel(rhs[c], 1e-10));
    }
}

TEST_CASE("rotating the environment rotates the irradiance field", "[envmap]") {
    const EnvironmentMap env = testutil::randomSmoothEnv(64, 32, 47);
    const int w = env.width(), h = env.height();
    LinearImage rotated(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            rotated.at(x, y) = env.image().at(((x - w / 4) % w + w) % w, y);
    const ShCoefficients sh = shProject(env);
    const ShCoefficients shRot = shProject(EnvironmentMap(std::move(rotated)));

    DeterministicRng rng(48);
    for (int i = 0; i < 30; ++i) {
        const Vec3 n = rng.unitVector();
        const Rgb before = shIrradiance(sh, n);
        const Rgb after = shIrradiance(shRot, rotate90AboutUp(n));
        for (int c = 0; c < 3; ++c) {
            if (std::fabs(before[c]) < 1e-6) continue;
            CHECK_THAT(after[c], Catch::Matchers::WithinRel(before[c], 0.01));
        }
    }
}

TEST_CASE("prefiltering a constant environment keeps the constant", "[envmap]") {
    const double c = 1.25;
    const PrefilteredEnv pre = prefilterEnv(constantEnv(32, c), 4);
    REQUIRE(pre.levelCount() == 4);
    for (int l = 0; l < 4; ++l)
        for (const Rgb& p : pre.levels[l].pixels())
            for (int ch = 0; ch < 3; ++ch)
                REQUIRE_THAT(p[ch], Catch::Matchers::WithinRel(c, 1e-3));
}

TEST_CASE("level zero is an untouched copy of the source", "[envmap]") {
    const EnvironmentMap env = testutil::randomSmoothEnv(32, 16, 49);
    const PrefilteredEnv pre = prefilterEnv(env, 3);
    REQUIRE(std::memcmp(pre.levels[0].pixels().data(), env.image().pixels().data(),
                        env.image().pixelCount() * sizeof(Rgb)) == 0);

    DeterministicRng rng(50);
    for (int i = 0; i < 100; ++i) {
        const Vec3 r = rng.unitVector();
        const Rgb direct = bilinearLookup(env.image(), r);
        const Rgb sampled = sampleSpecular(pre, r, 0.0);
        for (int c = 0; c < 3; ++c) REQUIRE(direct[c] == sampled[c]);
    }
}

TEST_CASE("prefilter spreads a bright texel but conserves its energy", "[envmap]") {
    const int w = 128;
    const EnvironmentMap env = singleTexelEnv(w, 40, 32, 100.0);  // on the equator
    const int levels = 5;
    const PrefilteredEnv pre = prefilterEnv(env, levels);

    const double source = levelPower(pre.levels[0]);
    for (int l = 1; l < levels; ++l) {
        const double power = levelPower(pre.levels[l]);
        INFO("level " << l);
        CHECK_THAT(power, Catch::Matchers::WithinRel(source, 0.03));
    }

    // The top level actually spread: its peak sits far below the source peak.
    double topPeak = 0.0;
    for (const Rgb& p : pre.levels[levels - 1].pixels())
        topPeak = std::max(topPeak, p.r);
    CHECK(topPeak < 1.0);
}

TEST_CASE("prefilter validates its preconditions", "[envmap]") {
    CHECK_THROWS_AS(prefilterEnv(constantEnv(32, 1.0), 1), std::invalid_argument);
    CHECK_THROWS_AS(prefilterEnv(constantEnv(8, 1.0), 4), std::invalid_argument);
}

TEST_CASE("specular lookup interpolates levels trilinearly", "[envmap]") {
    // Hand-built chain with distinct constants per level.
    PrefilteredEnv pre;
    pre.levels.push_back(LinearImage(16, 8, Rgb(1.0)));
    pre.levels.push_back(LinearImage(8, 4, Rgb(2.0)));
    pre.levels.push_back(LinearImage(4, 2, Rgb(4.0)));
    pre.levelRoughness = {0.0, 0.5, 1.0};

    const Vec3 r = Vec3(0.3, 0.5, -0.2).normalized();
    CHECK(sampleSpecular(pre, r, 0.0).r == 1.0);
    CHECK(sampleSpecular(pre, r, 0.5).r == 2.0);  // exact level-1 hit
    CHECK(sampleSpecular(pre, r, 1.0).r == 4.0);
    CHECK_THAT(sampleSpecular(pre, r, 0.25).r, Catch::Matchers::WithinRel(1.5, 1e-12));
    CHECK_THAT(sampleSpecular(pre, r, 0.75).r, Catch::Matchers::WithinRel(3.0, 1e-12));

    CHECK_THROWS_AS(sampleSpecular(pre, r, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(sampleSpecular(pre, Vec3(0, 0, 0.5), 0.5), std::invalid_argument);
}

TEST_CASE("constant chain returns the constant for any query", "[envmap]") {
    const double c = 0.6;
    const PrefilteredEnv pre = prefilterEnv(constantEnv(32, c), 3);
    DeterministicRng rng(51);
    for (int i = 0; i < 50; ++i) {
        const Rgb v = sampleSpecular(pre, rng.unitVector(), rng.uniform());
        CHECK_THAT(v.r, Catch::Matchers::WithinRel(c, 1e-3));
    }
}

TEST_CASE("specular lookup is Lipschitz in roughness", "[envmap]") {
    const EnvironmentMap env = testutil::randomSmoothEnv(32, 16, 52);
    const PrefilteredEnv pre = prefilterEnv(env, 4);

    // Measure a Lipschitz constant from the spread between levels, then check
    // fine steps against it.
    double maxLevelGap = 0.0;
    DeterministicRng rng(53);
    std::vector<Vec3> probes;
    for (int i = 0; i < 200; ++i) probes.push_back(rng.unitVector());
    for (int l = 0; l + 1 < pre.levelCount(); ++l)
        for (const Vec3& r : probes) {
            const Rgb a = bilinearLookup(pre.levels[l], r);
            const Rgb b = bilinearLookup(pre.levels[l + 1], r);
            for (int c = 0; c < 3; ++c)
                maxLevelGap = std::max(maxLevelGap, std::fabs(a[c] - b[c]));
        }
    const double lipschitz = (pre.levelCount() - 1) * maxLevelGap * 1.0001 + 1e-12;

    const double step = 1e-4;
    for (const Vec3& r : probes) {
        const double alpha = rng.uniform(0.0, 1.0 - step);
        const Rgb a = sampleSpecular(pre, r, alpha);
        const Rgb b = sampleSpecular(pre, r, alpha + step);
        for (int c = 0; c < 3; ++c)
            REQUIRE(std::fabs(a[c] - b[c]) <= lipschitz * step);
    }
}

TEST_CASE("asset construction is deterministic and cacheable", "[envmap]") {
    const EnvironmentMap env = testutil::randomSmoothEnv(32, 16, 54);
    const EnvAssets a = buildEnvAssets(env, 3);
    const EnvAssets b = buildEnvAssets(env, 3);
    REQUIRE(a.contentHash == b.contentHash);
    for (int l = 0; l < a.prefiltered.levelCount(); ++l)
        REQUIRE(std::memcmp(a.prefiltered.levels[l].pixels().data(),
                            b.prefiltered.levels[l].pixels().data(),
                            a.prefiltered.levels[l].pixelCount() * sizeof(Rgb)) == 0);

    const auto dir = testutil::tempDir("env_cache");
    const std::string path = (dir / "assets.bin").string();
    saveEnvAssets(path, a);
    const EnvAssets loaded = loadEnvAssets(path);
    REQUIRE(loaded.contentHash == a.contentHash);
    REQUIRE(loaded.prefilterSamples == a.prefilterSamples);
    for (int i = 0; i < 9; ++i)
        for (int c = 0; c < 3; ++c) REQUIRE(loaded.sh.c[i][c] == a.sh.c[i][c]);
    for (int l = 0; l < a.prefiltered.levelCount(); ++l)
        REQUIRE(std::memcmp(loaded.prefiltered.levels[l].pixels().data(),
                            a.prefiltered.levels[l].pixels().data(),
                            a.prefiltered.levels[l].pixelCount() * sizeof(Rgb)) == 0);

    // Corrupt magic is refused.
    std::ofstream(path, std::ios::binary) << "XXXXGARBAGE";
    CHECK_THROWS(loadEnvAssets(path));
}
