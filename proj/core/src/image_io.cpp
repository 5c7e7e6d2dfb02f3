#include "hazebridge/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

namespace hazebridge {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

Tensor from_rgb8(const std::vector<unsigned char>& rgb, int64_t h, int64_t w) {
    std::vector<real> data(3 * h * w);
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int64_t c = 0; c < 3; ++c)
                data[(c * h + y) * w + x] =
                    static_cast<real>(rgb[(y * w + x) * 3 + c]) / real(255);
    return Tensor::from_data({3, h, w}, std::move(data));
}

Tensor load_png_file(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("load_image: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("load_image: libpng init failed for " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("load_image: PNG decode error in " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // normalize every variant to 8-bit RGB
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int64_t w = png_get_image_width(png, info);
    const int64_t h = png_get_image_height(png, info);
    std::vector<unsigned char> rgb(3 * h * w);
    std::vector<png_bytep> rows(h);
    for (int64_t y = 0; y < h; ++y) rows[y] = rgb.data() + y * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return from_rgb8(rgb, h, w);
}

Tensor load_ppm_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_image: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "P6") throw IoError("load_image: unsupported PPM magic in " + path);
    auto next_value = [&]() {
        int64_t v;
        while (is >> std::ws && is.peek() == '#') is.ignore(1 << 16, '\n');
        if (!(is >> v)) throw IoError("load_image: malformed PPM header in " + path);
        return v;
    };
    const int64_t w = next_value();
    const int64_t h = next_value();
    const int64_t maxval = next_value();
    if (maxval != 255) throw IoError("load_image: only 8-bit PPM supported: " + path);
    is.ignore(1);  // single whitespace after maxval
    std::vector<unsigned char> rgb(3 * h * w);
    is.read(reinterpret_cast<char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!is) throw IoError("load_image: truncated PPM " + path);
    return from_rgb8(rgb, h, w);
}

unsigned char to_byte(real v) {
    const real clamped = std::min(real(1), std::max(real(0), v));
    return static_cast<unsigned char>(std::lround(clamped * 255));
}

}  // namespace

Tensor load_image(const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".ppm" || ext == ".PPM") return load_ppm_file(path);
    return load_png_file(path);
}

void save_png(const std::string& path, const Tensor& image) {
    if (image.ndim() != 3 || image.shape()[0] != 3)
        throw ShapeError("save_png: expected [3,H,W], got " + shape_str(image.shape()));
    const int64_t h = image.shape()[1], w = image.shape()[2];
    auto v = image.data();
    std::vector<unsigned char> rgb(3 * h * w);
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int64_t c = 0; c < 3; ++c)
                rgb[(y * w + x) * 3 + c] = to_byte(v[(c * h + y) * w + x]);

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("save_png: cannot open " + path + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("save_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("save_png: encode error for " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(h);
    for (int64_t y = 0; y < h; ++y) rows[y] = rgb.data() + y * w * 3;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void save_image_grid(const std::string& path, const std::vector<Tensor>& images,
                     int64_t columns) {
    if (images.empty()) throw ContractError("save_image_grid: no images");
    const int64_t h = images[0].shape()[1], w = images[0].shape()[2];
    const int64_t n = static_cast<int64_t>(images.size());
    const int64_t cols = std::max<int64_t>(1, columns);
    const int64_t rows = (n + cols - 1) / cols;
    const int64_t pad = 2;
    const int64_t gh = rows * (h + pad) + pad, gw = cols * (w + pad) + pad;
    std::vector<real> grid(3 * gh * gw, real(1));
    for (int64_t k = 0; k < n; ++k) {
        if (images[k].shape() != images[0].shape())
            throw ShapeError("save_image_grid: mixed image shapes");
        const int64_t r = k / cols, c = k % cols;
        auto src = images[k].data();
        for (int64_t ch = 0; ch < 3; ++ch)
            for (int64_t y = 0; y < h; ++y)
                for (int64_t x = 0; x < w; ++x)
                    grid[(ch * gh + pad + r * (h + pad) + y) * gw + pad + c * (w + pad) + x] =
                        src[(ch * h + y) * w + x];
    }
    save_png(path, Tensor::from_data({3, gh, gw}, std::move(grid)));
}

std::vector<std::string> list_image_files(const std::string& directory) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory)) throw IoError("list_image_files: not a directory: " + directory);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext == ".png" || ext == ".PNG" || ext == ".ppm" || ext == ".PPM")
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

}  // namespace hazebridge
