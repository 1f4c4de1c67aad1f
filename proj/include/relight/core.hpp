// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace relight {

/// 3-vector of doubles, used for directions and positions.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3 operator-() const { return {-x, -y, -z}; }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }

    Vec3 normalized() const {
        const double n = norm();
        if (n <= 0.0 || !std::isfinite(n))
            throw std::invalid_argument("cannot normalize zero or non-finite vector");
        return {x / n, y / n, z / n};
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

/// Linear RGB triple (relative radiance, unbounded above).
struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    Rgb() = default;
    Rgb(double r_, double g_, double b_) : r(r_), g(g_), b(b_) {}
    explicit Rgb(double v) : r(v), g(v), b(v) {}

    Rgb operator+(const Rgb& o) const { return {r + o.r, g + o.g, b + o.b}; }
    Rgb operator-(const Rgb& o) const { return {r - o.r, g - o.g, b - o.b}; }
    Rgb operator*(const Rgb& o) const { return {r * o.r, g * o.g, b * o.b}; }
    Rgb operator*(double s) const { return {r * s, g * s, b * s}; }
    Rgb operator/(double s) const { return {r / s, g / s, b / s}; }
    Rgb& operator+=(const Rgb& o) { r += o.r; g += o.g; b += o.b; return *this; }
    Rgb& operator*=(double s) { r *= s; g *= s; b *= s; return *this; }

    double& operator[](int c) { return c == 0 ? r : (c == 1 ? g : b); }
    double operator[](int c) const { return c == 0 ? r : (c == 1 ? g : b); }

    double maxComponent() const { return std::fmax(r, std::fmax(g, b)); }
    bool isFinite() const { return std::isfinite(r) && std::isfinite(g) && std::isfinite(b); }
};

inline Rgb operator*(double s, const Rgb& c) { return c * s; }

/// H x W raster of linear RGB radiance, double precision, row-major,
/// row 0 at the top.
class LinearImage {
  public:
    LinearImage() = default;
    LinearImage(int width, int height, Rgb fill = Rgb(0.0))
        : width_(width), height_(height) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("LinearImage dimensions must be >= 1");
        data_.assign(static_cast<size_t>(width) * height, fill);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    size_t pixelCount() const { return data_.size(); }

    Rgb& at(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
    const Rgb& at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }

    std::vector<Rgb>& pixels() { return data_; }
    const std::vector<Rgb>& pixels() const { return data_; }

    /// Enforces the radiance invariants: every channel finite and >= 0.
    void validate(const std::string& what = "LinearImage") const {
        if (width_ < 1 || height_ < 1)
            throw std::invalid_argument(what + ": dimensions must be >= 1");
        for (const Rgb& p : data_) {
            if (!p.isFinite())
                throw std::invalid_argument(what + ": non-finite pixel value");
            if (p.r < 0.0 || p.g < 0.0 || p.b < 0.0)
                throw std::invalid_argument(what + ": negative radiance value");
        }
    }

    bool sameShape(const LinearImage& o) const {
        return width_ == o.width_ && height_ == o.height_;
    }

  private:
    int width_ = 0;
    int height_ = 0;
    std::vector<Rgb> data_;
};

/// Per-pixel validity mask. true marks a valid (static) pixel.
class Mask {
  public:
    Mask() = default;
    Mask(int width, int height, bool fill = true)
        : width_(width), height_(height) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("Mask dimensions must be >= 1");
        data_.assign(static_cast<size_t>(width) * height, fill ? uint8_t(1) : uint8_t(0));
    }

    int width() const { return width_; }
    int height() const { return height_; }

    bool at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool v) { data_[static_cast<size_t>(y) * width_ + x] = v ? 1 : 0; }

    const std::vector<uint8_t>& raw() const { return data_; }

    size_t countTrue() const {
        size_t n = 0;
        for (uint8_t v : data_) n += (v != 0);
        return n;
    }

    bool sameShape(const LinearImage& img) const {
        return width_ == img.width() && height_ == img.height();
    }

  private:
    int width_ = 0;
    int height_ = 0;
    std::vector<uint8_t> data_;
};

/// Single-channel double raster (G-buffer scalar fields, depth passthrough).
class ScalarImage {
  public:
    ScalarImage() = default;
    ScalarImage(int width, int height, double fill = 0.0)
        : width_(width), height_(height) {
        if (width < 1 || height < 1)
            throw std::invalid_argument("ScalarImage dimensions must be >= 1");
        data_.assign(static_cast<size_t>(width) * height, fill);
    }

    int width() const { return width_; }
    int height() const { return height_; }

    double& at(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
    double at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }

    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

  private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

namespace detail {

/// 64-bit FNV-1a over a byte range; used to key derived assets to their source.
inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t seed = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

}  // namespace relight
