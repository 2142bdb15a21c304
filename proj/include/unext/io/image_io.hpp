#pragma once

// PNG/JPEG reading and PNG writing for 8-bit grayscale and RGB images.
// Interleaved row-major storage; all failures surface as IoError.

#include <cstdint>
#include <cstdio>
#include <csetjmp>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "unext/core/error.hpp"

namespace unext {

struct ImageU8 {
    int64_t h = 0, w = 0, channels = 0;
    std::vector<uint8_t> pix; // interleaved rows

    uint8_t at(int64_t y, int64_t x, int64_t c) const {
        return pix[static_cast<size_t>((y * w + x) * channels + c)];
    }
    uint8_t& at(int64_t y, int64_t x, int64_t c) {
        return pix[static_cast<size_t>((y * w + x) * channels + c)];
    }
};

namespace io_detail {

struct FileCloser {
    FILE* f = nullptr;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

struct JpegErr {
    jpeg_error_mgr mgr;
    jmp_buf jump;
    char msg[JMSG_LENGTH_MAX] = {0};
};

inline void jpeg_error_trap(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->msg);
    longjmp(err->jump, 1);
}

} // namespace io_detail

inline ImageU8 read_png(const std::string& path) {
    io_detail::FileCloser fc;
    fc.f = std::fopen(path.c_str(), "rb");
    if (!fc.f) throw IoError("cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png reader allocation failed for " + path);
    }
    ImageU8 out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode PNG " + path);
    }
    png_init_io(png, fc.f);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("unsupported PNG channel count in " + path);
    }
    out.h = h;
    out.w = w;
    out.channels = channels;
    out.pix.resize(static_cast<size_t>(out.h * out.w * out.channels));
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) {
        rows[y] = out.pix.data() + static_cast<size_t>(y) * w * static_cast<size_t>(channels);
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

inline void write_png(const std::string& path, const ImageU8& img) {
    require(img.channels == 1 || img.channels == 3, "write_png supports 1 or 3 channels");
    require(img.h > 0 && img.w > 0 &&
                img.pix.size() == static_cast<size_t>(img.h * img.w * img.channels),
            "write_png: inconsistent image buffer");
    io_detail::FileCloser fc;
    fc.f = std::fopen(path.c_str(), "wb");
    if (!fc.f) throw IoError("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png writer allocation failed for " + path);
    }
    std::vector<png_bytep> rows(static_cast<size_t>(img.h));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode PNG " + path);
    }
    png_init_io(png, fc.f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int64_t y = 0; y < img.h; ++y) {
        rows[static_cast<size_t>(y)] = const_cast<png_bytep>(
            img.pix.data() + static_cast<size_t>(y * img.w * img.channels));
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline ImageU8 read_jpeg(const std::string& path) {
    io_detail::FileCloser fc;
    fc.f = std::fopen(path.c_str(), "rb");
    if (!fc.f) throw IoError("cannot open " + path);
    jpeg_decompress_struct cinfo;
    io_detail::JpegErr err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = io_detail::jpeg_error_trap;
    ImageU8 out;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw IoError("failed to decode JPEG " + path + ": " + err.msg);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fc.f);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out.h = cinfo.output_height;
    out.w = cinfo.output_width;
    out.channels = 3;
    out.pix.resize(static_cast<size_t>(out.h * out.w * 3));
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.pix.data() + static_cast<size_t>(cinfo.output_scanline) *
                                            static_cast<size_t>(out.w * 3);
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

// Dispatch on file magic: PNG signature or JPEG SOI marker.
inline ImageU8 read_image(const std::string& path) {
    unsigned char magic[4] = {0, 0, 0, 0};
    {
        io_detail::FileCloser fc;
        fc.f = std::fopen(path.c_str(), "rb");
        if (!fc.f) throw IoError("cannot open " + path);
        if (std::fread(magic, 1, 4, fc.f) != 4) throw IoError("file too short: " + path);
    }
    if (magic[0] == 0x89 && magic[1] == 'P' && magic[2] == 'N' && magic[3] == 'G') {
        return read_png(path);
    }
    if (magic[0] == 0xFF && magic[1] == 0xD8) {
        return read_jpeg(path);
    }
    throw IoError("unrecognized image format: " + path);
}

} // namespace unext
