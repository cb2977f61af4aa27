#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "storyline/error.hpp"
#include "storyline/util.hpp"

namespace storyline {

/// Interleaved 8-bit RGB raster, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    std::uint8_t* at(int x, int y) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
    const std::uint8_t* at(int x, int y) const {
        return &rgb[(static_cast<std::size_t>(y) * width + x) * 3];
    }

    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        auto* p = at(x, y);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }

    bool operator==(const Image&) const = default;
};

/// Single-channel real-valued plane.
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    Plane() = default;
    Plane(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0) {}

    double& operator()(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    double operator()(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

inline double rec601_luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

inline Plane luma_plane(const Image& img) {
    Plane out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const auto* p = img.at(x, y);
            out(x, y) = rec601_luma(p[0], p[1], p[2]);
        }
    }
    return out;
}

namespace detail {

// Coverage weights of source cells [i, i+1) against the output cell
// [o*scale, (o+1)*scale). Works for both up- and down-sampling.
struct AxisWeights {
    std::vector<int> first;
    std::vector<std::vector<double>> weights;
};

inline AxisWeights area_weights(int src, int dst) {
    AxisWeights aw;
    aw.first.resize(static_cast<std::size_t>(dst));
    aw.weights.resize(static_cast<std::size_t>(dst));
    const double scale = static_cast<double>(src) / dst;
    for (int o = 0; o < dst; ++o) {
        const double lo = o * scale;
        const double hi = (o + 1) * scale;
        int i0 = static_cast<int>(std::floor(lo));
        int i1 = std::min(src, static_cast<int>(std::ceil(hi)));
        aw.first[static_cast<std::size_t>(o)] = i0;
        auto& w = aw.weights[static_cast<std::size_t>(o)];
        for (int i = i0; i < i1; ++i) {
            double cover = std::min<double>(hi, i + 1) - std::max<double>(lo, i);
            w.push_back(cover / scale);
        }
    }
    return aw;
}

}  // namespace detail

/// Box-filter (pixel area) resampling of a plane.
inline Plane resize_area(const Plane& src, int width, int height) {
    if (src.width == width && src.height == height) {
        return src;
    }
    const auto wx = detail::area_weights(src.width, width);
    const auto wy = detail::area_weights(src.height, height);
    Plane horizontal(width, src.height);
    for (int y = 0; y < src.height; ++y) {
        for (int x = 0; x < width; ++x) {
            const auto& w = wx.weights[static_cast<std::size_t>(x)];
            const int x0 = wx.first[static_cast<std::size_t>(x)];
            double acc = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                acc += w[i] * src(x0 + static_cast<int>(i), y);
            }
            horizontal(x, y) = acc;
        }
    }
    Plane out(width, height);
    for (int y = 0; y < height; ++y) {
        const auto& w = wy.weights[static_cast<std::size_t>(y)];
        const int y0 = wy.first[static_cast<std::size_t>(y)];
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (std::size_t i = 0; i < w.size(); ++i) {
                acc += w[i] * horizontal(x, y0 + static_cast<int>(i));
            }
            out(x, y) = acc;
        }
    }
    return out;
}

inline Image resize_area(const Image& src, int width, int height) {
    if (src.width == width && src.height == height) {
        return src;
    }
    Image out(width, height);
    for (int c = 0; c < 3; ++c) {
        Plane channel(src.width, src.height);
        for (std::size_t i = 0; i < src.pixel_count(); ++i) {
            channel.values[i] = src.rgb[i * 3 + static_cast<std::size_t>(c)];
        }
        Plane scaled = resize_area(channel, width, height);
        for (std::size_t i = 0; i < out.pixel_count(); ++i) {
            double v = std::clamp(std::round(scaled.values[i]), 0.0, 255.0);
            out.rgb[i * 3 + static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(v);
        }
    }
    return out;
}

/// Downscales so the long side is at most max_side; smaller images pass through.
inline Image limit_long_side(const Image& src, int max_side) {
    const int long_side = std::max(src.width, src.height);
    if (long_side <= max_side) {
        return src;
    }
    const double scale = static_cast<double>(max_side) / long_side;
    int w = std::max(1, static_cast<int>(std::lround(src.width * scale)));
    int h = std::max(1, static_cast<int>(std::lround(src.height * scale)));
    w = std::min(w, max_side);
    h = std::min(h, max_side);
    return resize_area(src, w, h);
}

// ---------------------------------------------------------------------------
// Codecs

namespace detail {

inline Image decode_png(std::string_view bytes) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::Parse, std::string("png: ") + png.message);
    }
    png.format = PNG_FORMAT_RGBA;
    std::vector<std::uint8_t> rgba(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, rgba.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        throw Error(ErrorCode::Parse, "png: " + msg);
    }
    Image img(static_cast<int>(png.width), static_cast<int>(png.height));
    // Alpha is composited over black.
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        const unsigned a = rgba[i * 4 + 3];
        for (std::size_t c = 0; c < 3; ++c) {
            const unsigned v = rgba[i * 4 + c];
            img.rgb[i * 3 + c] = static_cast<std::uint8_t>((v * a + 127) / 255);
        }
    }
    return img;
}

struct JpegErrorManager {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// No objects with non-trivial destructors may be created between setjmp and
// the last possible longjmp in this frame.
inline bool decode_jpeg_into(std::string_view bytes, Image& img, std::vector<std::uint8_t>& row,
                             std::string& error) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    if (setjmp(jerr.jump)) {
        error = jerr.message;
        jpeg_destroy_decompress(&cinfo);
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, reinterpret_cast<const unsigned char*>(bytes.data()),
                 static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    img.width = static_cast<int>(cinfo.output_width);
    img.height = static_cast<int>(cinfo.output_height);
    img.rgb.resize(img.pixel_count() * 3);
    row.resize(static_cast<std::size_t>(cinfo.output_width) * cinfo.output_components);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW rows[1] = {row.data()};
        const auto y = cinfo.output_scanline;
        jpeg_read_scanlines(&cinfo, rows, 1);
        std::memcpy(&img.rgb[static_cast<std::size_t>(y) * img.width * 3], row.data(),
                    static_cast<std::size_t>(img.width) * 3);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

inline Image decode_jpeg(std::string_view bytes) {
    Image img;
    std::vector<std::uint8_t> row;
    std::string error;
    if (!decode_jpeg_into(bytes, img, row, error)) {
        throw Error(ErrorCode::Parse, "jpeg: " + error);
    }
    return img;
}

inline void skip_pnm_space(std::string_view bytes, std::size_t& pos) {
    while (pos < bytes.size()) {
        if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') {
                ++pos;
            }
        } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
            ++pos;
        } else {
            break;
        }
    }
}

inline int read_pnm_int(std::string_view bytes, std::size_t& pos) {
    skip_pnm_space(bytes, pos);
    int value = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
        value = value * 10 + (bytes[pos] - '0');
        if (value > (1 << 24)) {
            throw Error(ErrorCode::Parse, "ppm: header value too large");
        }
        ++pos;
        any = true;
    }
    if (!any) {
        throw Error(ErrorCode::Parse, "ppm: malformed header");
    }
    return value;
}

inline Image decode_ppm(std::string_view bytes) {
    std::size_t pos = 2;
    const int w = read_pnm_int(bytes, pos);
    const int h = read_pnm_int(bytes, pos);
    const int maxval = read_pnm_int(bytes, pos);
    if (w <= 0 || h <= 0 || maxval != 255) {
        throw Error(ErrorCode::Parse, "ppm: only 8-bit P6 is supported");
    }
    ++pos;
    Image img(w, h);
    if (bytes.size() < pos + img.rgb.size()) {
        throw Error(ErrorCode::Parse, "ppm: truncated pixel data");
    }
    std::memcpy(img.rgb.data(), bytes.data() + pos, img.rgb.size());
    return img;
}

}  // namespace detail

/// Decodes PNG, JPEG or binary PPM (P6) by magic bytes.
inline Image decode_image(std::string_view bytes) {
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), "\x89PNG\r\n\x1a\n", 8) == 0) {
        return detail::decode_png(bytes);
    }
    if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
        static_cast<unsigned char>(bytes[1]) == 0xD8) {
        return detail::decode_jpeg(bytes);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
        return detail::decode_ppm(bytes);
    }
    throw Error(ErrorCode::Parse, "unrecognized image container");
}

inline Image load_image(const std::filesystem::path& path) {
    Image img = decode_image(read_file(path));
    if (img.width <= 0 || img.height <= 0) {
        throw Error(ErrorCode::Parse, "empty image " + path.string());
    }
    return img;
}

inline void write_png(const std::filesystem::path& path, const Image& img) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(img.width);
    png.height = static_cast<png_uint_32>(img.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, img.rgb.data(), 0, nullptr)) {
        throw Error(ErrorCode::Io, "png write failed for " + path.string() + ": " + png.message);
    }
}

inline void write_ppm(const std::filesystem::path& path, const Image& img) {
    std::string bytes = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    bytes.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
    write_file(path, bytes);
}

inline void write_jpeg(const std::filesystem::path& path, const Image& img, int quality = 95) {
    std::FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (fp == nullptr) {
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    }
    jpeg_compress_struct cinfo;
    jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, fp);
    cinfo.image_width = static_cast<JDIMENSION>(img.width);
    cinfo.image_height = static_cast<JDIMENSION>(img.height);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row[1] = {const_cast<JSAMPLE*>(&img.rgb[static_cast<std::size_t>(cinfo.next_scanline) * img.width * 3])};
        jpeg_write_scanlines(&cinfo, row, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
    std::fclose(fp);
}

}  // namespace storyline
