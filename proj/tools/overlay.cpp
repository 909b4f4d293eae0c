#include "overlay.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "uscd/error.hpp"

namespace scd_cli {

void write_overlay_png(const uscd::RgbImage& image, const uscd::Mask& mask, const std::filesystem::path& path) {
    if (!mask.same_shape(image) || image.channels() != 3) throw uscd::ValidationError("overlay: shape mismatch");
    std::vector<png_byte> rgb(image.size());
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                const int v = image(x, y, c);
                const int tint = c == 0 ? 255 : 0;
                rgb[(static_cast<std::size_t>(y) * image.width() + x) * 3 + c] =
                    static_cast<png_byte>(mask(x, y) ? (v + tint) / 2 : v);
            }
        }
    }

    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw uscd::IoError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, nullptr);
        throw uscd::IoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw uscd::IoError("libpng failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height(); ++y) {
        png_write_row(png, rgb.data() + static_cast<std::size_t>(y) * image.width() * 3);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace scd_cli
