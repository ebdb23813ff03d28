#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "tfcl/core/error.hpp"
#include "tfcl/wavelet/scalogram.hpp"

namespace tfcl::wavelet {

inline constexpr char kTfscaMagic[8] = {'T', 'F', 'S', 'C', 'A', '0', '0', '1'};

static_assert(std::endian::native == std::endian::little, "float exports assume a little-endian host");

/// `TFSCA001` followed by H*W*C little-endian float32 values in (H, W, C)
/// row-major order. Dimensions are implied: 128 x 128 x 3.
inline void write_tfsca(const Scalogram& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot write '" + path + "'");
    out.write(kTfscaMagic, sizeof kTfscaMagic);
    std::vector<float> hwc(s.planes.size());
    std::size_t i = 0;
    for (std::size_t y = 0; y < s.height(); ++y)
        for (std::size_t x = 0; x < s.width(); ++x)
            for (std::size_t c = 0; c < s.channels(); ++c) hwc[i++] = s.at(y, x, c);
    out.write(reinterpret_cast<const char*>(hwc.data()), static_cast<std::streamsize>(hwc.size() * sizeof(float)));
    require(static_cast<bool>(out), ErrorCode::IoError, "write to '" + path + "' failed");
}

inline Scalogram read_tfsca(const std::string& path, std::size_t height = 128, std::size_t width = 128,
                            std::size_t channels = 3) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::IoError, "cannot open '" + path + "'");
    char magic[8];
    in.read(magic, sizeof magic);
    require(in.gcount() == 8 && std::memcmp(magic, kTfscaMagic, 8) == 0, ErrorCode::CorruptManifest,
            "'" + path + "' is not a TFSCA001 file");
    std::vector<float> hwc(height * width * channels);
    in.read(reinterpret_cast<char*>(hwc.data()), static_cast<std::streamsize>(hwc.size() * sizeof(float)));
    require(static_cast<std::size_t>(in.gcount()) == hwc.size() * sizeof(float), ErrorCode::SizeMismatch,
            "'" + path + "' is truncated");
    in.peek();
    require(in.eof(), ErrorCode::SizeMismatch, "'" + path + "' has trailing bytes");
    Scalogram s = blank_scalogram(height, width, channels);
    std::size_t i = 0;
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            for (std::size_t c = 0; c < channels; ++c) s.at(y, x, c) = hwc[i++];
    return s;
}

/// 8-bit RGB preview: x, y, z axes become red, green, blue.
inline void write_png(const Scalogram& s, const std::string& path) {
    require(s.channels() == 3, ErrorCode::BadShape, "PNG preview needs 3 channels");
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
    require(file != nullptr, ErrorCode::IoError, "cannot write '" + path + "'");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorCode::IoError, "libpng failed writing '" + path + "'");
    }
    png_init_io(png, file.get());
    const auto w = static_cast<png_uint_32>(s.width());
    const auto h = static_cast<png_uint_32>(s.height());
    png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(3 * s.width());
    for (std::size_t y = 0; y < s.height(); ++y) {
        for (std::size_t x = 0; x < s.width(); ++x)
            for (std::size_t c = 0; c < 3; ++c)
                row[3 * x + c] = static_cast<png_byte>(std::lround(std::clamp(s.at(y, x, c), 0.0f, 1.0f) * 255.0f));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace tfcl::wavelet
