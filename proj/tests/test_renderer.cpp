// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gradient_check.hpp"
#include "relight/envmap.hpp"
#include "relight/random.hpp"
#include "relight/renderer.hpp"
#include "test_support.hpp"

using namespace relight;

namespace {

EnvAssets constantAssets(double value, int width = 32, int levels = 3) {
    return buildEnvAssets(EnvironmentMap(LinearImage(width, width / 2, Rgb(value))),
                          levels);
}

GBuffer uniformGBuffer(int w, int h, Rgb cb, Vec3 n, double rough, double metal) {
    GBuffer g(w, h);
    for (size_t i = 0; i < g.pixelCount(); ++i) {
        g.basecolor[i] = cb;
        g.normal[i] = n.normalized();
        g.roughness[i] = rough;
        g.metallic[i] = metal;
    }
    return g;
}

}  // namespace

TEST_CASE("schlick fresnel endpoints", "[renderer]") {
    const Rgb f0(0.04, 0.04, 0.04);
    const Rgb atNormal = fresnelSchlick(1.0, f0);
    CHECK(atNormal.r == 0.04);
    const Rgb grazing = fresnelSchlick(0.0, f0);
    CHECK(grazing.r == 1.0);
    CHECK(grazing.g == 1.0);

    // Dielectric F0 is 0.04 regardless of basecolor when metallic is zero.
    const double m = 0.0;
    const Rgb cb(0.8, 0.1, 0.3);
    for (int c = 0; c < 3; ++c)
        CHECK(kDielectricF0 * (1.0 - m) + cb[c] * m == 0.04);

    CHECK_THROWS_AS(fresnelSchlick(1.2, f0), std::invalid_argument);
    CHECK_THROWS_AS(fresnelSchlick(0.5, Rgb(1.5, 0, 0)), std::invalid_argument);
}

TEST_CASE("fresnel stays within [F0, 1]", "[renderer]") {
    DeterministicRng rng(61);
    for (int i = 0; i < 1000; ++i) {
        const Rgb f0(rng.uniform(), rng.uniform(), rng.uniform());
        const Rgb f = fresnelSchlick(rng.uniform(), f0);
        for (int c = 0; c < 3; ++c) {
            REQUIRE(f[c] >= f0[c]);
            REQUIRE(f[c] <= 1.0);
        }
    }
}

TEST_CASE("reflection direction identities", "[renderer]") {
    const Vec3 n(0, 1, 0);
    const Vec3 r1 = reflectDir(n, n);
    CHECK_THAT(testutil::angleBetween(r1, n), Catch::Matchers::WithinAbs(0.0, 1e-9));

    const double s = std::sqrt(0.5);
    const Vec3 v(s, s, 0);
    const Vec3 r2 = reflectDir(n, v);
    CHECK_THAT(r2.x, Catch::Matchers::WithinAbs(-s, 1e-12));
    CHECK_THAT(r2.y, Catch::Matchers::WithinAbs(s, 1e-12));
    CHECK_THAT(r2.z, Catch::Matchers::WithinAbs(0.0, 1e-12));

    DeterministicRng rng(62);
    for (int i = 0; i < 500; ++i) {
        const Vec3 nn = rng.unitVector();
        const Vec3 vv = rng.unitVector();
        if (nn.dot(vv) <= 1e-3) continue;
        const Vec3 r = reflectDir(nn, vv);
        REQUIRE_THAT(r.norm(), Catch::Matchers::WithinAbs(1.0, 1e-6));
        REQUIRE_THAT(r.dot(nn), Catch::Matchers::WithinAbs(vv.dot(nn), 1e-9));
    }

    CHECK_THROWS_AS(reflectDir(Vec3(0, 1, 0), Vec3(0, -1, 0)), std::invalid_argument);
}

TEST_CASE("zero environment renders exactly black", "[renderer]") {
    const EnvAssets assets = constantAssets(0.0);
    const GBuffer g = uniformGBuffer(4, 4, Rgb(1.0), Vec3(0.2, 0.3, 1.0), 0.4, 0.5);
    const LinearImage out = renderForward(g, assets, ViewSetup::sharedDirection(Vec3(0, 0, 1)));
    for (const Rgb& p : out.pixels())
        for (int c = 0; c < 3; ++c) REQUIRE(p[c] == 0.0);
}

TEST_CASE("furnace: white dielectric in a constant environment", "[renderer]") {
    const double c = 1.4;
    const EnvAssets assets = constantAssets(c);
    DeterministicRng rng(63);
    for (int i = 0; i < 100; ++i) {
        const Vec3 n = rng.unitVector();
        Vec3 v = rng.unitVector();
        if (n.dot(v) <= 1e-3) {
            --i;
            continue;
        }
        GBuffer g = uniformGBuffer(1, 1, Rgb(1.0), n, rng.uniform(0.01, 1.0), 0.0);
        const LinearImage out = renderForward(g, assets, ViewSetup::sharedDirection(v));
        for (int ch = 0; ch < 3; ++ch)
            REQUIRE_THAT(out.at(0, 0)[ch], Catch::Matchers::WithinRel(c, 0.01));
    }
}

TEST_CASE("metal endpoint kills the diffuse term", "[renderer]") {
    const EnvAssets assets = constantAssets(2.0);
    const Rgb cb(0.9, 0.6, 0.2);
    const Vec3 n = Vec3(0.1, 0.4, 1.0).normalized();
    const Vec3 v(0, 0, 1);
    const GBuffer g = uniformGBuffer(2, 2, cb, n, 0.3, 1.0);
    const RenderOutput out = renderForwardFull(g, assets, ViewSetup::sharedDirection(v));
    for (const Rgb& p : out.diffuse.pixels())
        for (int c = 0; c < 3; ++c) REQUIRE(p[c] == 0.0);

    // With m = 1, F0 = basecolor and the image is the pure specular product.
    const Rgb fresnel = fresnelSchlick(n.dot(v), cb);
    for (int c = 0; c < 3; ++c)
        CHECK_THAT(out.image.at(0, 0)[c],
                   Catch::Matchers::WithinRel(fresnel[c] * 2.0, 0.011));
}

TEST_CASE("diffuse and specular planes sum to the pre-clamp image", "[renderer]") {
    const EnvAssets assets =
        buildEnvAssets(testutil::randomSmoothEnv(32, 16, 64), 3);
    DeterministicRng rng(65);
    GBuffer g(8, 8);
    for (size_t i = 0; i < g.pixelCount(); ++i) {
        g.basecolor[i] = Rgb(rng.uniform(), rng.uniform(), rng.uniform());
        g.normal[i] = rng.unitVector();
        g.roughness[i] = rng.uniform(0.01, 1.0);
        g.metallic[i] = rng.uniform();
    }
    const ViewSetup view = ViewSetup::sharedDirection(Vec3(0, 0, 1));
    const RenderOutput out = renderForwardFull(g, assets, view);
    for (size_t i = 0; i < g.pixelCount(); ++i)
        for (int c = 0; c < 3; ++c) {
            const double pre = out.diffuse.pixels()[i][c] + out.specular.pixels()[i][c];
            REQUIRE(out.image.pixels()[i][c] == std::fmax(pre, 0.0));
            REQUIRE(out.image.pixels()[i][c] >= 0.0);
        }
}

TEST_CASE("back-facing pixels render black and are flagged", "[renderer]") {
    const EnvAssets assets = constantAssets(1.0);
    GBuffer g = uniformGBuffer(2, 1, Rgb(0.5), Vec3(0, 0, 1), 0.5, 0.0);
    g.normal[1] = Vec3(0, 0, -1);  // faces away from the +Z view
    const RenderOutput out =
        renderForwardFull(g, assets, ViewSetup::sharedDirection(Vec3(0, 0, 1)));
    CHECK_FALSE(out.backFacing.at(0, 0));
    CHECK(out.backFacing.at(1, 0));
    for (int c = 0; c < 3; ++c) CHECK(out.image.at(1, 0)[c] == 0.0);

    const GBufferGradients grad =
        renderBackward(g, assets, ViewSetup::sharedDirection(Vec3(0, 0, 1)),
                       LinearImage(2, 1, Rgb(1.0)));
    CHECK(grad.roughness[1] == 0.0);
    CHECK(grad.metallic[1] == 0.0);
    CHECK(grad.basecolor[1].r == 0.0);
}

TEST_CASE("zero adjoint produces zero gradients", "[renderer]") {
    const EnvAssets assets =
        buildEnvAssets(testutil::randomSmoothEnv(32, 16, 66), 3);
    const GBuffer g = uniformGBuffer(3, 3, Rgb(0.7), Vec3(0.1, 0.2, 1.0), 0.4, 0.6);
    const GBufferGradients grad =
        renderBackward(g, assets, ViewSetup::sharedDirection(Vec3(0, 0, 1)),
                       LinearImage(3, 3, Rgb(0.0)));
    for (size_t i = 0; i < g.pixelCount(); ++i) {
        REQUIRE(grad.basecolor[i].r == 0.0);
        REQUIRE(grad.normal[i].norm() == 0.0);
        REQUIRE(grad.roughness[i] == 0.0);
        REQUIRE(grad.metallic[i] == 0.0);
    }
}

TEST_CASE("basecolor gradient of a dielectric matches (1-F) * E_diff", "[renderer]") {
    const double c = 1.25;
    const EnvAssets assets = constantAssets(c, 64, 3);
    const Vec3 n = Vec3(0.2, 0.5, 1.0).normalized();
    const Vec3 v(0, 0, 1);
    const GBuffer g = uniformGBuffer(1, 1, Rgb(0.5), n, 0.5, 0.0);
    const GBufferGradients grad =
        renderBackward(g, assets, ViewSetup::sharedDirection(v), LinearImage(1, 1, Rgb(1.0)));
    const Rgb fresnel = fresnelSchlick(n.dot(v), Rgb(0.04));
    for (int ch = 0; ch < 3; ++ch)
        CHECK_THAT(grad.basecolor[0][ch],
                   Catch::Matchers::WithinRel((1.0 - fresnel[ch]) * c, 2e-3));
}

TEST_CASE("analytic gradients match central differences", "[renderer]") {
    DeterministicRng rng(67);
    int checked = 0, matched = 0, skipped = 0;
    double worst = 0.0;
    for (int scene = 0; scene < 10; ++scene) {
        const EnvAssets assets =
            buildEnvAssets(testutil::randomSmoothEnv(32, 16, 700 + scene), 4);
        for (int trial = 0; trial < 16; ++trial) {
            const gradcheck::Probe probe = gradcheck::randomProbe(rng);
            const int param = rng.uniformInt(0, gradcheck::kParamCount - 1);
            double relErr = 0.0;
            const gradcheck::Outcome outcome =
                gradcheck::checkProbe(probe, assets, param, 1e-4, 1e-3, &relErr);
            if (outcome == gradcheck::Outcome::SkippedBreakpoint) {
                ++skipped;
                continue;
            }
            ++checked;
            if (outcome == gradcheck::Outcome::Match) ++matched;
            worst = std::max(worst, relErr);
        }
    }
    INFO("checked=" << checked << " skipped=" << skipped << " worst=" << worst);
    REQUIRE(checked >= 100);
    REQUIRE(matched == checked);
}

TEST_CASE("roughness at a mip breakpoint returns the lower-side slope", "[renderer]") {
    PrefilteredEnv pre;
    pre.levels.push_back(LinearImage(16, 8, Rgb(1.0)));
    pre.levels.push_back(LinearImage(8, 4, Rgb(2.0)));
    pre.levels.push_back(LinearImage(4, 2, Rgb(4.0)));
    pre.levelRoughness = {0.0, 0.5, 1.0};

    const Vec3 r = Vec3(0.4, 0.1, 0.9).normalized();
    const SpecularSample mid = sampleSpecularGrad(pre, r, 0.5);
    CHECK(mid.value.r == 2.0);
    CHECK_THAT(mid.dRoughness.r, Catch::Matchers::WithinRel(2.0 * (2.0 - 1.0), 1e-12));

    const SpecularSample top = sampleSpecularGrad(pre, r, 1.0);
    CHECK(top.value.r == 4.0);
    CHECK_THAT(top.dRoughness.r, Catch::Matchers::WithinRel(2.0 * (4.0 - 2.0), 1e-12));
    CHECK(std::isfinite(top.dRoughness.g));

    const SpecularSample bottom = sampleSpecularGrad(pre, r, 0.0);
    CHECK(bottom.value.r == 1.0);
    CHECK_THAT(bottom.dRoughness.r, Catch::Matchers::WithinRel(2.0 * (2.0 - 1.0), 1e-12));
}

TEST_CASE("forward rejects mismatched shapes", "[renderer]") {
    const EnvAssets assets = constantAssets(1.0);
    const GBuffer g = uniformGBuffer(4, 4, Rgb(0.5), Vec3(0, 0, 1), 0.5, 0.0);
    const ViewSetup pinhole = ViewSetup::pinhole(8, 8, 16.0, 4.0, 4.0);
    CHECK_THROWS_AS(renderForward(g, assets, pinhole), std::invalid_argument);
    CHECK_THROWS_AS(
        renderBackward(g, assets, ViewSetup::sharedDirection(Vec3(0, 0, 1)),
                       LinearImage(3, 3, Rgb(0.0))),
        std::invalid_argument);
}

TEST_CASE("g-buffer directory round trip preserves planes", "[renderer]") {
    const auto dir = testutil::tempDir("gbuffer_io");
    DeterministicRng rng(68);
    GBuffer g(6, 4);
    for (size_t i = 0; i < g.pixelCount(); ++i) {
        g.basecolor[i] = Rgb(rng.uniform(), rng.uniform(), rng.uniform());
        g.normal[i] = rng.unitVector();
        g.roughness[i] = rng.uniform(0.01, 1.0);
        g.metallic[i] = rng.uniform();
    }
    ScalarImage depth(6, 4);
    for (double& v : depth.values()) v = rng.uniform(0.1, 50.0);
    g.depth = depth;

    saveGBuffer(dir.string(), g);
    const GBuffer back = loadGBuffer(dir.string());
    REQUIRE(back.width == 6);
    REQUIRE(back.height == 4);
    REQUIRE(back.depth.has_value());
    for (size_t i = 0; i < g.pixelCount(); ++i) {
        for (int c = 0; c < 3; ++c)
            REQUIRE_THAT(back.basecolor[i][c],
                         Catch::Matchers::WithinAbs(g.basecolor[i][c], 1e-6));
        REQUIRE(testutil::angleBetween(back.normal[i], g.normal[i]) < 1e-5);
        REQUIRE_THAT(back.roughness[i], Catch::Matchers::WithinAbs(g.roughness[i], 1e-6));
        REQUIRE_THAT(back.metallic[i], Catch::Matchers::WithinAbs(g.metallic[i], 1e-6));
        REQUIRE_THAT(back.depth->values()[i],
                     Catch::Matchers::WithinRel(depth.values()[i], 1e-6));
    }

    // Depth plane is optional; without it the load still succeeds.
    const auto dir2 = testutil::tempDir("gbuffer_io_nodepth");
    GBuffer plain = g;
    plain.depth.reset();
    saveGBuffer(dir2.string(), plain);
    CHECK_FALSE(loadGBuffer(dir2.string()).depth.has_value());
}
