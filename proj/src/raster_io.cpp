#include "fishrec/raster_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "fishrec/errors.hpp"

namespace fishrec {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_suffix(const std::string& s, const char* suf) {
    const std::size_t n = std::strlen(suf);
    if (s.size() < n) return false;
    std::string tail = s.substr(s.size() - n);
    std::transform(tail.begin(), tail.end(), tail.begin(), [](unsigned char c) { return std::tolower(c); });
    return tail == suf;
}

Image read_png_file(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw data_error("cannot open image file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw data_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw data_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw data_error("failed to decode PNG: " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw data_error("unsupported PNG channel layout in " + path);
    }

    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * channels);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = raw.data() + static_cast<std::size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(static_cast<int>(w), static_cast<int>(h), channels);
    for (std::size_t i = 0; i < raw.size(); ++i) img.data()[i] = raw[i] / 255.0f;
    return img;
}

Image read_pnm_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open image file: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P6") throw data_error("unsupported PNM magic in " + path);
    auto next_int = [&in, &path]() {
        for (;;) {
            int c = in.peek();
            if (c == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(c)) {
                in.get();
            } else {
                break;
            }
        }
        long v;
        if (!(in >> v)) throw data_error("truncated PNM header in " + path);
        return v;
    };
    const long w = next_int(), h = next_int(), maxval = next_int();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw data_error("unsupported PNM header in " + path);
    in.get();  // single whitespace before payload
    const int channels = magic == "P6" ? 3 : 1;
    std::vector<char> raw(static_cast<std::size_t>(w) * h * channels);
    in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
    if (!in) throw data_error("truncated PNM payload in " + path);
    Image img(static_cast<int>(w), static_cast<int>(h), channels);
    for (std::size_t i = 0; i < raw.size(); ++i)
        img.data()[i] = static_cast<std::uint8_t>(raw[i]) / static_cast<float>(maxval);
    return img;
}

}  // namespace

Image read_image(const std::string& path) {
    if (has_suffix(path, ".pgm") || has_suffix(path, ".ppm") || has_suffix(path, ".pnm"))
        return read_pnm_file(path);
    return read_png_file(path);
}

void write_png(const std::string& path, const Image& img) {
    if (img.empty()) throw data_error("write_png: empty image");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw data_error("cannot write image file: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw data_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw data_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw data_error("failed to encode PNG: " + path);
    }

    png_init_io(png, fp.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, img.width(), img.height(), 8,
                 img.channels() == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const int ch = img.channels();
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width()) * ch);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < ch; ++c)
                row[static_cast<std::size_t>(x) * ch + c] = static_cast<std::uint8_t>(
                    std::clamp(std::lround(img.at(x, y, c) * 255.0f), 0L, 255L));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Mask read_mask(const std::string& path) {
    const Image img = read_image(path).to_gray();
    Mask m(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            m.set(x, y, img.at(x, y) > 0.5f);
    return m;
}

void write_mask_png(const std::string& path, const Mask& mask) {
    Image img(mask.width(), mask.height(), 1);
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            img.at(x, y) = mask.at(x, y) ? 1.0f : 0.0f;
    write_png(path, img);
}

void write_pgm(const std::string& path, const Image& gray) {
    if (gray.channels() != 1) throw data_error("write_pgm: expected grayscale");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("cannot write image file: " + path);
    out << "P5\n" << gray.width() << " " << gray.height() << "\n255\n";
    for (int y = 0; y < gray.height(); ++y)
        for (int x = 0; x < gray.width(); ++x)
            out.put(static_cast<char>(std::clamp(std::lround(gray.at(x, y) * 255.0f), 0L, 255L)));
}

}  // namespace fishrec
