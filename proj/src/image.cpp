// SPDX-License-Identifier: Apache-2.0
#include "lumen/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <system_error>

namespace lumen::inline LUMEN_ABI {

std::uint8_t encode_gamma8(Real linear) {
    const double v = std::clamp(static_cast<double>(linear), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(std::pow(v, 1.0 / kDisplayGamma) * 255.0));
}

Real decode_gamma8(std::uint8_t value) {
    return static_cast<Real>(std::pow(static_cast<double>(value) / 255.0, kDisplayGamma));
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageIoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// libpng reports errors by longjmp back to the setjmp in the caller.
void png_error_fn(png_structp png, png_const_charp msg) {
    auto* slot = static_cast<std::string*>(png_get_error_ptr(png));
    if (slot) *slot = msg;
    png_longjmp(png, 1);
}
void png_warning_fn(png_structp, png_const_charp) {}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + len);
}

void png_flush_noop(png_structp) {}

// Rows of raw bytes -> PNG stream. bit_depth 8 or 16 (16-bit rows big endian).
std::vector<std::uint8_t> encode_rows(int width, int height, int color_type, int bit_depth,
                                      const std::vector<std::uint8_t>& raw, std::size_t row_bytes) {
    std::vector<std::uint8_t> out;
    std::string error;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
    if (!png) throw ImageIoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError("libpng: " + error);
    }
    {
        png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
        png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                     color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int y = 0; y < height; ++y) {
            png_write_row(png, const_cast<png_bytep>(raw.data() + static_cast<std::size_t>(y) * row_bytes));
        }
        png_write_end(png, nullptr);
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

struct MemoryReader {
    const std::vector<std::uint8_t>* data;
    std::size_t pos;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t len) {
    auto* r = static_cast<MemoryReader*>(png_get_io_ptr(png));
    if (r->pos + len > r->data->size()) png_error(png, "truncated PNG stream");
    std::memcpy(out, r->data->data() + r->pos, len);
    r->pos += len;
}

struct DecodedPng {
    int width = 0, height = 0, channels = 0, bit_depth = 0;
    std::vector<std::uint8_t> raw;
    std::size_t row_bytes = 0;
};

DecodedPng decode(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw ImageIoError("not a PNG file");
    DecodedPng d;
    MemoryReader reader{&bytes, 0};
    std::string error;
    std::vector<png_bytep> rows;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
    if (!png) throw ImageIoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("libpng: " + error);
    }
    {
        png_set_read_fn(png, &reader, png_read_from_memory);
        png_read_info(png, info);
        d.width = static_cast<int>(png_get_image_width(png, info));
        d.height = static_cast<int>(png_get_image_height(png, info));
        d.bit_depth = png_get_bit_depth(png, info);
        const int color = png_get_color_type(png, info);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && d.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        png_read_update_info(png, info);
        d.channels = png_get_channels(png, info);
        d.bit_depth = png_get_bit_depth(png, info);
        d.row_bytes = png_get_rowbytes(png, info);
        d.raw.resize(d.row_bytes * static_cast<std::size_t>(d.height));
        rows.resize(static_cast<std::size_t>(d.height));
        for (int y = 0; y < d.height; ++y) rows[static_cast<std::size_t>(y)] = d.raw.data() + static_cast<std::size_t>(y) * d.row_bytes;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return d;
}

}  // namespace

std::vector<std::uint8_t> encode_png8(const Image& image) {
    if (image.channels != 1 && image.channels != 3) throw ImageIoError("encode_png8: need 1 or 3 channels");
    const std::size_t row_bytes = static_cast<std::size_t>(image.width) * image.channels;
    std::vector<std::uint8_t> raw(row_bytes * static_cast<std::size_t>(image.height));
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = encode_gamma8(image.data[i]);
    return encode_rows(image.width, image.height, image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                       8, raw, row_bytes);
}

void write_png8(const std::filesystem::path& path, const Image& image) {
    write_file_atomic(path, encode_png8(image));
}

Image read_png8(const std::filesystem::path& path) {
    const DecodedPng d = decode(read_file(path));
    if (d.bit_depth != 8) throw ImageIoError(path.string() + ": expected an 8-bit PNG");
    Image img(d.width, d.height, d.channels);
    for (int y = 0; y < d.height; ++y) {
        const std::uint8_t* row = d.raw.data() + static_cast<std::size_t>(y) * d.row_bytes;
        for (int i = 0; i < d.width * d.channels; ++i)
            img.data[static_cast<std::size_t>(y) * d.width * d.channels + i] = decode_gamma8(row[i]);
    }
    return img;
}

void write_png16(const std::filesystem::path& path, const Image& depth, double scale) {
    if (depth.channels != 1) throw ImageIoError("write_png16: need a single channel");
    if (!(scale > 0)) throw ImageIoError("write_png16: scale must be > 0");
    const std::size_t row_bytes = static_cast<std::size_t>(depth.width) * 2;
    std::vector<std::uint8_t> raw(row_bytes * static_cast<std::size_t>(depth.height));
    for (std::size_t i = 0; i < depth.data.size(); ++i) {
        const double v = std::clamp(std::round(static_cast<double>(depth.data[i]) / scale), 0.0, 65535.0);
        const auto q = static_cast<std::uint16_t>(v);
        raw[2 * i] = static_cast<std::uint8_t>(q >> 8);
        raw[2 * i + 1] = static_cast<std::uint8_t>(q & 0xff);
    }
    write_file_atomic(path, encode_rows(depth.width, depth.height, PNG_COLOR_TYPE_GRAY, 16, raw, row_bytes));
}

Image read_png16(const std::filesystem::path& path, double scale) {
    const DecodedPng d = decode(read_file(path));
    if (d.bit_depth != 16 || d.channels != 1) throw ImageIoError(path.string() + ": expected 16-bit gray PNG");
    Image img(d.width, d.height, 1);
    for (int y = 0; y < d.height; ++y) {
        const std::uint8_t* row = d.raw.data() + static_cast<std::size_t>(y) * d.row_bytes;
        for (int x = 0; x < d.width; ++x) {
            const unsigned q = (static_cast<unsigned>(row[2 * x]) << 8) | row[2 * x + 1];
            img.data[static_cast<std::size_t>(y) * d.width + x] = static_cast<Real>(q * scale);
        }
    }
    return img;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t pos) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
    return v;
}

constexpr char kRawMagic[8] = {'L', 'M', 'R', 'A', 'W', '1', 0, 0};

}  // namespace

void write_raw(const std::filesystem::path& path, const Image& image) {
    std::vector<std::uint8_t> out(kRawMagic, kRawMagic + 8);
    put_u32(out, static_cast<std::uint32_t>(image.width));
    put_u32(out, static_cast<std::uint32_t>(image.height));
    put_u32(out, static_cast<std::uint32_t>(image.channels));
    for (Real v : image.data) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
    write_file_atomic(path, out);
}

Image read_raw(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> in = read_file(path);
    if (in.size() < 20 || std::memcmp(in.data(), kRawMagic, 8) != 0) throw ImageIoError("not a raw float image");
    Image img(static_cast<int>(get_u32(in, 8)), static_cast<int>(get_u32(in, 12)), static_cast<int>(get_u32(in, 16)));
    if (in.size() != 20 + img.data.size() * 4) throw ImageIoError("truncated raw float image");
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const std::uint32_t bits = get_u32(in, 20 + 4 * i);
        float f;
        std::memcpy(&f, &bits, 4);
        img.data[i] = static_cast<Real>(f);
    }
    return img;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ImageIoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw ImageIoError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Image quantize8(const Image& image) {
    Image out = image;
    for (auto& v : out.data) v = decode_gamma8(encode_gamma8(v));
    return out;
}

}  // namespace lumen::inline LUMEN_ABI
