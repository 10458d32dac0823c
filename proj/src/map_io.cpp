#include "matxfer/map_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "matxfer/errors.hpp"

namespace matxfer {

MapPaths MapPaths::from_stem(const std::string& stem) {
    return {stem + "_normal.png", stem + "_diffuse.png",
            stem + "_roughness.png", stem + "_specular.png"};
}

float srgb_to_linear(float v) {
    if (v <= 0.04045f) return v / 12.92f;
    return std::pow((v + 0.055f) / 1.055f, 2.4f);
}

float linear_to_srgb(float v) {
    if (v <= 0.0031308f) return v * 12.92f;
    return 1.055f * std::pow(v, 1.0f / 2.4f) - 0.055f;
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

ImageBuffer read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open PNG for reading: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("failed to decode PNG: " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 width = png_get_image_width(png, info);
    png_uint_32 height = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (bit_depth == 16) png_set_swap(png); // stored big-endian
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    bit_depth = png_get_bit_depth(png, info);
    int channels = png_get_channels(png, info);
    if (bit_depth != 8 && bit_depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unsupported PNG bit depth in " + path);
    }

    std::size_t row_bytes = png_get_rowbytes(png, info);
    std::vector<unsigned char> raw(row_bytes * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    ImageBuffer out(static_cast<int>(width), static_cast<int>(height), channels);
    const std::size_t n = out.data.size();
    if (bit_depth == 8) {
        for (std::size_t i = 0; i < n; ++i)
            out.data[i] = raw[i] / 255.0f;
    } else {
        const auto* p16 = reinterpret_cast<const std::uint16_t*>(raw.data());
        for (std::size_t i = 0; i < n; ++i)
            out.data[i] = p16[i] / 65535.0f;
    }
    return out;
}

void write_png(const std::string& path, const ImageBuffer& img, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16)
        throw DataError("unsupported PNG bit depth for writing");
    if (img.channels != 1 && img.channels != 3)
        throw DataError("write_png supports 1 or 3 channels");

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("cannot open PNG for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("failed to encode PNG: " + path);
    }

    png_init_io(png, fp.get());
    int color_type = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, img.width, img.height, bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);

    const std::size_t n = img.data.size();
    std::vector<png_bytep> rows(img.height);
    if (bit_depth == 8) {
        std::vector<unsigned char> raw(n);
        for (std::size_t i = 0; i < n; ++i) {
            float v = img.data[i];
            v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
            raw[i] = static_cast<unsigned char>(v * 255.0f + 0.5f);
        }
        std::size_t row_elems = static_cast<std::size_t>(img.width) * img.channels;
        for (int y = 0; y < img.height; ++y) rows[y] = raw.data() + y * row_elems;
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
    } else {
        std::vector<std::uint16_t> raw(n);
        for (std::size_t i = 0; i < n; ++i) {
            float v = img.data[i];
            v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
            raw[i] = static_cast<std::uint16_t>(v * 65535.0f + 0.5f);
        }
        std::size_t row_elems = static_cast<std::size_t>(img.width) * img.channels;
        for (int y = 0; y < img.height; ++y)
            rows[y] = reinterpret_cast<png_bytep>(raw.data() + y * row_elems);
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
    }
    png_destroy_write_struct(&png, &info);
}

namespace {

ImageBuffer require_channels(const ImageBuffer& img, int want, const std::string& path) {
    if (img.channels == want) return img;
    throw DataError("unexpected channel count in " + path);
}

} // namespace

ParameterMaps read_maps(const MapPaths& paths) {
    ImageBuffer n_img = read_png(paths.normal);
    ImageBuffer d_img = read_png(paths.diffuse);
    ImageBuffer r_img = read_png(paths.roughness);
    ImageBuffer s_img = read_png(paths.specular);

    const int w = n_img.width, h = n_img.height;
    for (const ImageBuffer* img : {&d_img, &r_img, &s_img})
        if (img->width != w || img->height != h)
            throw DataError("resolution mismatch across the four map files for stem of " + paths.normal);

    n_img = require_channels(n_img, 3, paths.normal);
    d_img = require_channels(d_img, 3, paths.diffuse);
    s_img = require_channels(s_img, 3, paths.specular);
    if (r_img.channels != 1 && r_img.channels != 3)
        throw DataError("unexpected channel count in " + paths.roughness);

    ParameterMaps m(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t p = m.pixel(x, y);
            float rgb[3] = {n_img.at(x, y, 0), n_img.at(x, y, 1), n_img.at(x, y, 2)};
            decode_normal(rgb, &m.normal[3 * p]);
            for (int c = 0; c < 3; ++c) {
                m.diffuse[3 * p + c] = srgb_to_linear(d_img.at(x, y, c));
                m.specular[3 * p + c] = srgb_to_linear(s_img.at(x, y, c));
            }
            m.roughness[p] = r_img.at(x, y, 0); // channel 0 of gray or RGB
        }
    }
    return m;
}

void write_maps(const ParameterMaps& m, const MapPaths& paths, int bit_depth) {
    ImageBuffer n_img(m.width, m.height, 3);
    ImageBuffer d_img(m.width, m.height, 3);
    ImageBuffer r_img(m.width, m.height, 1);
    ImageBuffer s_img(m.width, m.height, 3);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            std::size_t p = m.pixel(x, y);
            float rgb[3];
            encode_normal(&m.normal[3 * p], rgb);
            for (int c = 0; c < 3; ++c) {
                n_img.at(x, y, c) = rgb[c];
                d_img.at(x, y, c) = linear_to_srgb(m.diffuse[3 * p + c]);
                s_img.at(x, y, c) = linear_to_srgb(m.specular[3 * p + c]);
            }
            r_img.at(x, y, 0) = m.roughness[p];
        }
    }
    write_png(paths.normal, n_img, bit_depth);
    write_png(paths.diffuse, d_img, bit_depth);
    write_png(paths.roughness, r_img, bit_depth);
    write_png(paths.specular, s_img, bit_depth);
}

} // namespace matxfer
