// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "relight/core.hpp"
#include "relight/image_io.hpp"

namespace relight {

inline constexpr double kRoughnessFloor = 0.01;

/// Per-pixel intrinsic scene description consumed by the shading model.
/// Depth is an optional passthrough plane; shading never reads it.
struct GBuffer {
    int width = 0;
    int height = 0;
    std::vector<Rgb> basecolor;     // [0,1] per channel
    std::vector<Vec3> normal;       // unit vectors
    std::vector<double> roughness;  // [kRoughnessFloor, 1]
    std::vector<double> metallic;   // [0,1]
    std::optional<ScalarImage> depth;

    GBuffer() = default;
    GBuffer(int w, int h)
        : width(w),
          height(h),
          basecolor(static_cast<size_t>(w) * h, Rgb(0.5)),
          normal(static_cast<size_t>(w) * h, Vec3(0, 0, 1)),
          roughness(static_cast<size_t>(w) * h, 0.5),
          metallic(static_cast<size_t>(w) * h, 0.0) {
        if (w < 1 || h < 1) throw std::invalid_argument("GBuffer dimensions must be >= 1");
    }

    size_t pixelCount() const { return static_cast<size_t>(width) * height; }

    /// Interchange-level check. The renderer itself renormalizes normals, so
    /// shading entry points pass a looser `normalTolerance`; gradient probes
    /// and optimizers may hold slightly off-unit normal parameters.
    void validate(double normalTolerance = 1e-4) const {
        if (width < 1 || height < 1)
            throw std::invalid_argument("GBuffer: dimensions must be >= 1");
        const size_t n = pixelCount();
        if (basecolor.size() != n || normal.size() != n || roughness.size() != n ||
            metallic.size() != n)
            throw std::invalid_argument("GBuffer: field sizes disagree");
        for (size_t i = 0; i < n; ++i) {
            const Rgb& c = basecolor[i];
            if (!c.isFinite() || c.r < 0 || c.r > 1 || c.g < 0 || c.g > 1 || c.b < 0 || c.b > 1)
                throw std::invalid_argument("GBuffer: basecolor outside [0,1]");
            const double len = normal[i].norm();
            if (!std::isfinite(len) || std::fabs(len - 1.0) > normalTolerance)
                throw std::invalid_argument("GBuffer: normal not unit length");
            if (!std::isfinite(roughness[i]) || roughness[i] < kRoughnessFloor ||
                roughness[i] > 1.0)
                throw std::invalid_argument("GBuffer: roughness outside [0.01,1]");
            if (!std::isfinite(metallic[i]) || metallic[i] < 0.0 || metallic[i] > 1.0)
                throw std::invalid_argument("GBuffer: metallic outside [0,1]");
        }
    }

    /// Clamps every field back to its legal range and renormalizes normals.
    void projectToRanges() {
        for (size_t i = 0; i < pixelCount(); ++i) {
            for (int c = 0; c < 3; ++c)
                basecolor[i][c] = std::clamp(basecolor[i][c], 0.0, 1.0);
            const double len = normal[i].norm();
            normal[i] = len > 1e-12 ? normal[i] / len : Vec3(0, 0, 1);
            roughness[i] = std::clamp(roughness[i], kRoughnessFloor, 1.0);
            metallic[i] = std::clamp(metallic[i], 0.0, 1.0);
        }
    }
};

/// Adjoints of a scalar loss w.r.t. each G-buffer field. Normal gradients are
/// taken w.r.t. the stored (pre-normalization) vector.
struct GBufferGradients {
    int width = 0;
    int height = 0;
    std::vector<Rgb> basecolor;
    std::vector<Vec3> normal;
    std::vector<double> roughness;
    std::vector<double> metallic;

    GBufferGradients() = default;
    GBufferGradients(int w, int h)
        : width(w),
          height(h),
          basecolor(static_cast<size_t>(w) * h, Rgb(0.0)),
          normal(static_cast<size_t>(w) * h, Vec3(0, 0, 0)),
          roughness(static_cast<size_t>(w) * h, 0.0),
          metallic(static_cast<size_t>(w) * h, 0.0) {}

    size_t pixelCount() const { return static_cast<size_t>(width) * height; }

    bool allFinite() const {
        for (size_t i = 0; i < pixelCount(); ++i) {
            if (!basecolor[i].isFinite()) return false;
            if (!std::isfinite(normal[i].x) || !std::isfinite(normal[i].y) ||
                !std::isfinite(normal[i].z))
                return false;
            if (!std::isfinite(roughness[i]) || !std::isfinite(metallic[i])) return false;
        }
        return true;
    }
};

/// Per-pixel unit view directions pointing toward the camera. Either one
/// shared direction for the whole image or a pinhole ray field.
class ViewSetup {
  public:
    static ViewSetup sharedDirection(const Vec3& dir) {
        ViewSetup v;
        v.shared_ = dir.normalized();
        v.isShared_ = true;
        return v;
    }

    /// Camera on the +Z axis looking at the image plane; the ray through
    /// pixel center (x+0.5, y+0.5) is tilted by the focal length in pixels.
    static ViewSetup pinhole(int width, int height, double focalPx,
                             double cx, double cy) {
        if (width < 1 || height < 1 || !(focalPx > 0.0))
            throw std::invalid_argument("ViewSetup::pinhole: invalid parameters");
        ViewSetup v;
        v.isShared_ = false;
        v.width_ = width;
        v.height_ = height;
        v.field_.resize(static_cast<size_t>(width) * height);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x)
                v.field_[static_cast<size_t>(y) * width + x] =
                    Vec3((cx - (x + 0.5)) / focalPx, (cy - (y + 0.5)) / focalPx, 1.0)
                        .normalized();
        return v;
    }

    Vec3 at(int x, int y) const {
        if (isShared_) return shared_;
        return field_[static_cast<size_t>(y) * width_ + x];
    }

    bool compatibleWith(int width, int height) const {
        return isShared_ || (width_ == width && height_ == height);
    }

  private:
    bool isShared_ = true;
    Vec3 shared_{0, 0, 1};
    int width_ = 0;
    int height_ = 0;
    std::vector<Vec3> field_;
};

// ---------------------------------------------------------------------------
// Directory interchange: one EXR per plane. Normals are remapped from
// [-1,1] to [0,1] for storage; roughness/metallic/depth are single-channel.
// ---------------------------------------------------------------------------

inline void saveGBuffer(const std::string& dir, const GBuffer& g) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    LinearImage basecolor(g.width, g.height), normal(g.width, g.height);
    ScalarImage rough(g.width, g.height), metal(g.width, g.height);
    for (size_t i = 0; i < g.pixelCount(); ++i) {
        basecolor.pixels()[i] = g.basecolor[i];
        const Vec3& n = g.normal[i];
        normal.pixels()[i] = Rgb((n.x + 1.0) * 0.5, (n.y + 1.0) * 0.5, (n.z + 1.0) * 0.5);
        rough.values()[i] = g.roughness[i];
        metal.values()[i] = g.metallic[i];
    }
    writeExr((fs::path(dir) / "basecolor.exr").string(), basecolor);
    writeExr((fs::path(dir) / "normal.exr").string(), normal);
    writeExrScalar((fs::path(dir) / "roughness.exr").string(), rough);
    writeExrScalar((fs::path(dir) / "metallic.exr").string(), metal);
    if (g.depth)
        writeExrScalar((fs::path(dir) / "depth.exr").string(), *g.depth);
}

inline GBuffer loadGBuffer(const std::string& dir) {
    namespace fs = std::filesystem;
    const LinearImage basecolor = readExr((fs::path(dir) / "basecolor.exr").string());
    const LinearImage normal = readExr((fs::path(dir) / "normal.exr").string());
    const ScalarImage rough = readExrScalar((fs::path(dir) / "roughness.exr").string());
    const ScalarImage metal = readExrScalar((fs::path(dir) / "metallic.exr").string());
    if (!basecolor.sameShape(normal) || rough.width() != basecolor.width() ||
        rough.height() != basecolor.height() || metal.width() != basecolor.width() ||
        metal.height() != basecolor.height())
        throw std::runtime_error("loadGBuffer '" + dir + "': plane dimensions disagree");

    GBuffer g(basecolor.width(), basecolor.height());
    for (size_t i = 0; i < g.pixelCount(); ++i) {
        g.basecolor[i] = basecolor.pixels()[i];
        const Rgb& np = normal.pixels()[i];
        g.normal[i] =
            Vec3(np.r * 2.0 - 1.0, np.g * 2.0 - 1.0, np.b * 2.0 - 1.0).normalized();
        g.roughness[i] = rough.values()[i];
        g.metallic[i] = metal.values()[i];
    }
    const fs::path depthPath = fs::path(dir) / "depth.exr";
    if (fs::exists(depthPath)) g.depth = readExrScalar(depthPath.string());
    g.validate();
    return g;
}

}  // namespace relight
