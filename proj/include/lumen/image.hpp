// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lumen/config.hpp"

namespace lumen::inline LUMEN_ABI {

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear float image, row-major, interleaved channels.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<Real> data;

    Image() = default;
    Image(int w, int h, int c, Real fill = 0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    Real& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    Real at(int x, int y, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

inline constexpr double kDisplayGamma = 2.2;

std::uint8_t encode_gamma8(Real linear);
Real decode_gamma8(std::uint8_t value);

/// 8-bit PNG (gray or RGB) with gamma 2.2 encoding of linear values.
std::vector<std::uint8_t> encode_png8(const Image& image);
void write_png8(const std::filesystem::path& path, const Image& image);
Image read_png8(const std::filesystem::path& path);

/// 16-bit gray PNG; stored value = round(depth / scale).
void write_png16(const std::filesystem::path& path, const Image& depth, double scale);
Image read_png16(const std::filesystem::path& path, double scale);

/// Raw little-endian float32 dump: "LMRAW1\0\0", u32 width, height, channels, data.
void write_raw(const std::filesystem::path& path, const Image& image);
Image read_raw(const std::filesystem::path& path);

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

/// Linear RGB in [0,1]: 8-bit-quantized display values decoded back to linear.
Image quantize8(const Image& image);

}  // namespace lumen::inline LUMEN_ABI
