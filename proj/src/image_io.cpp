#include "vitray/image_io.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include <jpeglib.h>
#include <png.h>

namespace vitray {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.string().c_str(), mode));
    if (!f) {
        throw IoError("cannot open " + path.string());
    }
    return f;
}

GrayImage gray_from_rows(const std::vector<std::vector<png_byte>>& rows,
                         std::size_t height, std::size_t width, std::size_t channels) {
    GrayImage img = make_gray(height, width);
    for (std::size_t i = 0; i < height; ++i) {
        const png_byte* row = rows[i].data();
        for (std::size_t j = 0; j < width; ++j) {
            if (channels == 1) {
                img.pixels[i * width + j] = row[j];
            } else {
                const png_byte* px = row + j * channels;
                img.pixels[i * width + j] = luminance(px[0], px[1], px[2]);
            }
        }
    }
    return img;
}

GrayImage load_png(std::FILE* f, const std::filesystem::path& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        throw Error("libpng initialization failed");
    }
    std::vector<std::vector<png_byte>> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("undecodable PNG: " + path.string());
    }
    png_init_io(png, f);
    png_read_info(png, info);

    // Normalize every layout to 8-bit gray or 8-bit RGB.
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if ((color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) &&
        png_get_bit_depth(png, info) < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    png_read_update_info(png, info);

    const std::size_t height = png_get_image_height(png, info);
    const std::size_t width = png_get_image_width(png, info);
    const std::size_t channels = png_get_channels(png, info);
    if (height == 0 || width == 0 || (channels != 1 && channels != 3)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("unsupported PNG layout: " + path.string());
    }
    rows.assign(height, std::vector<png_byte>(png_get_rowbytes(png, info)));
    std::vector<png_bytep> row_ptrs(height);
    for (std::size_t i = 0; i < height; ++i) row_ptrs[i] = rows[i].data();
    png_read_image(png, row_ptrs.data());
    png_destroy_read_struct(&png, &info, nullptr);
    return gray_from_rows(rows, height, width, channels);
}

struct JpegErrorMgr {
    jpeg_error_mgr base;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(mgr->jump, 1);
}

GrayImage load_jpeg(std::FILE* f, const std::filesystem::path& path) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw FormatError("undecodable JPEG: " + path.string());
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f);
    jpeg_read_header(&cinfo, TRUE);
    // Grayscale sources pass through untouched; color sources are decoded to
    // RGB so our own luminance formula applies.
    const bool is_gray = cinfo.jpeg_color_space == JCS_GRAYSCALE;
    cinfo.out_color_space = is_gray ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);

    const std::size_t height = cinfo.output_height;
    const std::size_t width = cinfo.output_width;
    const std::size_t channels = cinfo.output_components;
    GrayImage img = make_gray(height, width);
    std::vector<JSAMPLE> row(width * channels);
    JSAMPROW row_ptr = row.data();
    while (cinfo.output_scanline < cinfo.output_height) {
        std::size_t i = cinfo.output_scanline;
        jpeg_read_scanlines(&cinfo, &row_ptr, 1);
        for (std::size_t j = 0; j < width; ++j) {
            if (channels == 1) {
                img.pixels[i * width + j] = row[j];
            } else {
                img.pixels[i * width + j] =
                    luminance(row[j * 3], row[j * 3 + 1], row[j * 3 + 2]);
            }
        }
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return img;
}

} // namespace

GrayImage load_image(const std::filesystem::path& path) {
    FilePtr f = open_file(path, "rb");
    unsigned char sig[8] = {};
    std::size_t got = std::fread(sig, 1, sizeof(sig), f.get());
    std::rewind(f.get());
    if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) {
        return load_png(f.get(), path);
    }
    if (got >= 2 && sig[0] == 0xFF && sig[1] == 0xD8) {
        return load_jpeg(f.get(), path);
    }
    throw FormatError("not a PNG or JPEG file: " + path.string());
}

void save_png(const GrayImage& img, const std::filesystem::path& path) {
    if (img.height == 0 || img.width == 0) throw ContractError("save_png: empty image");
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        throw Error("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG write failed: " + path.string());
    }
    png_init_io(png, f.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t i = 0; i < img.height; ++i) {
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() + i * img.width));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace vitray
