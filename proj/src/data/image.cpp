#include "data/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "core/error.hpp"

namespace steadapt {

Image Image::from_tensor(const Tensor<float>& t) {
    Shape s = t.shape();
    if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
    if (s.size() != 3) throw InvalidShape("image tensor must be (C,H,W)");
    Image img(s[0], s[1], s[2]);
    for (std::int64_t i = 0; i < t.numel(); ++i) img.v[static_cast<size_t>(i)] = t[i];
    return img;
}

namespace {
struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace

Image read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DecodeError("cannot open image: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DecodeError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DecodeError("libpng info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DecodeError("failed to decode PNG: " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    // Normalize everything to 8-bit RGB.
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    std::vector<png_byte> rowbuf(static_cast<size_t>(png_get_rowbytes(png, info)));
    Image img(3, static_cast<int>(h), static_cast<int>(w));
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, rowbuf.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, static_cast<int>(y), static_cast<int>(x)) =
                    static_cast<float>(rowbuf[x * 3 + c]) / 255.0f;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const Image& img, const std::string& path) {
    if (img.c != 3) throw InvalidShape("write_png expects a 3-channel image");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng info init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode PNG: " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(static_cast<size_t>(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x)
            for (int c = 0; c < 3; ++c) {
                const float v = img.at(c, y, x);
                const float clamped = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                row[static_cast<size_t>(x) * 3 + c] =
                    static_cast<png_byte>(std::lround(clamped * 255.0f));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image crop(const Image& img, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || y0 + h > img.h || x0 + w > img.w)
        throw InvalidShape("crop window out of bounds");
    Image out(img.c, h, w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    return out;
}

Image hflip(const Image& img) {
    Image out(img.c, img.h, img.w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) out.at(c, y, x) = img.at(c, y, img.w - 1 - x);
    return out;
}

Image vflip(const Image& img) {
    Image out(img.c, img.h, img.w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) out.at(c, y, x) = img.at(c, img.h - 1 - y, x);
    return out;
}

Image permute_channels(const Image& img, const std::vector<int>& order) {
    if (static_cast<int>(order.size()) != img.c) throw InvalidShape("channel order size");
    Image out(img.c, img.h, img.w);
    for (int c = 0; c < img.c; ++c)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) out.at(c, y, x) = img.at(order[c], y, x);
    return out;
}

void clamp01(Image& img) {
    for (float& v : img.v) v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
}

double mse(const Image& a, const Image& b) {
    if (a.c != b.c || a.h != b.h || a.w != b.w)
        throw InvalidShape("mse: image sizes differ");
    double s = 0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        const double d = static_cast<double>(a.v[i]) - static_cast<double>(b.v[i]);
        s += d * d;
    }
    return s / static_cast<double>(a.v.size());
}

}  // namespace steadapt
