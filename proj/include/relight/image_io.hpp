// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ImfChannelList.h>
#include <ImfFrameBuffer.h>
#include <ImfHeader.h>
#include <ImfInputFile.h>
#include <ImfOutputFile.h>
#include <png.h>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "relight/core.hpp"

namespace relight {

// ---------------------------------------------------------------------------
// EXR: scanline RGB, 32-bit float channels. Linear radiance interchange
// format for all HDR imagery. In-memory data stays double precision.
// ---------------------------------------------------------------------------

inline void writeExr(const std::string& path, const LinearImage& img) {
    img.validate("writeExr input");
    const int w = img.width();
    const int h = img.height();
    std::vector<float> rgb(static_cast<size_t>(w) * h * 3);
    for (size_t i = 0; i < img.pixelCount(); ++i) {
        rgb[i * 3 + 0] = static_cast<float>(img.pixels()[i].r);
        rgb[i * 3 + 1] = static_cast<float>(img.pixels()[i].g);
        rgb[i * 3 + 2] = static_cast<float>(img.pixels()[i].b);
    }
    try {
        Imf::Header header(w, h);
        header.channels().insert("R", Imf::Channel(Imf::FLOAT));
        header.channels().insert("G", Imf::Channel(Imf::FLOAT));
        header.channels().insert("B", Imf::Channel(Imf::FLOAT));
        Imf::OutputFile file(path.c_str(), header);
        Imf::FrameBuffer fb;
        const size_t xs = sizeof(float) * 3;
        const size_t ys = xs * w;
        char* base = reinterpret_cast<char*>(rgb.data());
        fb.insert("R", Imf::Slice(Imf::FLOAT, base + 0 * sizeof(float), xs, ys));
        fb.insert("G", Imf::Slice(Imf::FLOAT, base + 1 * sizeof(float), xs, ys));
        fb.insert("B", Imf::Slice(Imf::FLOAT, base + 2 * sizeof(float), xs, ys));
        file.setFrameBuffer(fb);
        file.writePixels(h);
    } catch (const std::exception& e) {
        throw std::runtime_error("writeExr '" + path + "': " + e.what());
    }
}

inline LinearImage readExr(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw std::runtime_error("readExr '" + path + "': file does not exist");
    std::vector<float> rgb;
    int w = 0, h = 0;
    try {
        Imf::InputFile file(path.c_str());
        const Imath::Box2i dw = file.header().dataWindow();
        w = dw.max.x - dw.min.x + 1;
        h = dw.max.y - dw.min.y + 1;

        int channelCount = 0;
        const Imf::ChannelList& channels = file.header().channels();
        for (auto it = channels.begin(); it != channels.end(); ++it) ++channelCount;
        if (channelCount != 3 || !channels.findChannel("R") ||
            !channels.findChannel("G") || !channels.findChannel("B"))
            throw std::runtime_error("expected exactly R,G,B channels");

        rgb.assign(static_cast<size_t>(w) * h * 3, 0.0f);
        Imf::FrameBuffer fb;
        const size_t xs = sizeof(float) * 3;
        const size_t ys = xs * w;
        char* base = reinterpret_cast<char*>(rgb.data()) -
                     (static_cast<ptrdiff_t>(dw.min.y) * ys + dw.min.x * xs);
        fb.insert("R", Imf::Slice(Imf::FLOAT, base + 0 * sizeof(float), xs, ys));
        fb.insert("G", Imf::Slice(Imf::FLOAT, base + 1 * sizeof(float), xs, ys));
        fb.insert("B", Imf::Slice(Imf::FLOAT, base + 2 * sizeof(float), xs, ys));
        file.setFrameBuffer(fb);
        file.readPixels(dw.min.y, dw.max.y);
    } catch (const std::runtime_error&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error("readExr '" + path + "': " + e.what());
    }
    LinearImage img(w, h);
    for (size_t i = 0; i < img.pixelCount(); ++i)
        img.pixels()[i] = Rgb(rgb[i * 3 + 0], rgb[i * 3 + 1], rgb[i * 3 + 2]);
    img.validate("readExr '" + path + "'");
    return img;
}

/// Single-channel float EXR ("Y"), used for scalar G-buffer planes.
inline void writeExrScalar(const std::string& path, const ScalarImage& img) {
    const int w = img.width();
    const int h = img.height();
    std::vector<float> y(static_cast<size_t>(w) * h);
    for (size_t i = 0; i < y.size(); ++i) {
        const double v = img.values()[i];
        if (!std::isfinite(v))
            throw std::invalid_argument("writeExrScalar: non-finite value");
        y[i] = static_cast<float>(v);
    }
    try {
        Imf::Header header(w, h);
        header.channels().insert("Y", Imf::Channel(Imf::FLOAT));
        Imf::OutputFile file(path.c_str(), header);
        Imf::FrameBuffer fb;
        fb.insert("Y", Imf::Slice(Imf::FLOAT, reinterpret_cast<char*>(y.data()),
                                  sizeof(float), sizeof(float) * w));
        file.setFrameBuffer(fb);
        file.writePixels(h);
    } catch (const std::exception& e) {
        throw std::runtime_error("writeExrScalar '" + path + "': " + e.what());
    }
}

inline ScalarImage readExrScalar(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw std::runtime_error("readExrScalar '" + path + "': file does not exist");
    std::vector<float> y;
    int w = 0, h = 0;
    try {
        Imf::InputFile file(path.c_str());
        const Imath::Box2i dw = file.header().dataWindow();
        w = dw.max.x - dw.min.x + 1;
        h = dw.max.y - dw.min.y + 1;

        const Imf::ChannelList& channels = file.header().channels();
        int channelCount = 0;
        std::string name;
        for (auto it = channels.begin(); it != channels.end(); ++it) {
            ++channelCount;
            name = it.name();
        }
        if (channelCount != 1)
            throw std::runtime_error("expected exactly one channel");

        y.assign(static_cast<size_t>(w) * h, 0.0f);
        Imf::FrameBuffer fb;
        const size_t xs = sizeof(float);
        const size_t ys = xs * w;
        char* base = reinterpret_cast<char*>(y.data()) -
                     (static_cast<ptrdiff_t>(dw.min.y) * ys + dw.min.x * xs);
        fb.insert(name.c_str(), Imf::Slice(Imf::FLOAT, base, xs, ys));
        file.setFrameBuffer(fb);
        file.readPixels(dw.min.y, dw.max.y);
    } catch (const std::runtime_error&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error("readExrScalar '" + path + "': " + e.what());
    }
    ScalarImage img(w, h);
    for (size_t i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y[i]))
            throw std::runtime_error("readExrScalar '" + path + "': non-finite pixel");
        img.values()[i] = y[i];
    }
    return img;
}

// ---------------------------------------------------------------------------
// PNG: 8-bit single-channel masks. 0 reads as false, any nonzero byte as
// true; writes emit strict 0/255.
// ---------------------------------------------------------------------------

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

inline void writeMaskPng(const std::string& path, const Mask& mask) {
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("writeMaskPng '" + path + "': cannot open for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("writeMaskPng: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("writeMaskPng '" + path + "': libpng error");
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, mask.width(), mask.height(), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(mask.width());
    for (int yy = 0; yy < mask.height(); ++yy) {
        for (int xx = 0; xx < mask.width(); ++xx)
            row[xx] = mask.at(xx, yy) ? 255 : 0;
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline Mask readMaskPng(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("readMaskPng '" + path + "': file does not exist");

    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw std::runtime_error("readMaskPng '" + path + "': not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("readMaskPng: libpng init failed");
    }

    // setjmp scope: keep row storage outside so cleanup stays trivial.
    std::vector<png_byte> pixels;
    std::vector<png_bytep> rows;
    int w = 0, h = 0;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("readMaskPng '" + path + "': malformed PNG");
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    w = static_cast<int>(png_get_image_width(png, info));
    h = static_cast<int>(png_get_image_height(png, info));
    const int colorType = png_get_color_type(png, info);
    const int bitDepth = png_get_bit_depth(png, info);
    if (colorType != PNG_COLOR_TYPE_GRAY || bitDepth != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("readMaskPng '" + path +
                                 "': mask must be 8-bit single-channel grayscale");
    }

    pixels.assign(static_cast<size_t>(w) * h, 0);
    rows.resize(h);
    for (int yy = 0; yy < h; ++yy)
        rows[yy] = pixels.data() + static_cast<size_t>(yy) * w;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Mask mask(w, h);
    for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx)
            mask.set(xx, yy, pixels[static_cast<size_t>(yy) * w + xx] != 0);
    return mask;
}

}  // namespace relight
