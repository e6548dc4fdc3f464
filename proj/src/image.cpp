#include "droidretriever/image.hpp"

#include <png.h>

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "droidretriever/errors.hpp"

namespace dr {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw PreconditionError("negative image size");
    pixels_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
        pixels_[i] = fill.r;
        pixels_[i + 1] = fill.g;
        pixels_[i + 2] = fill.b;
    }
}

void Image::fill_rect(const Rect& r, Rgb c) {
    const Rect clipped = r.intersect({0, 0, width_, height_});
    if (!clipped.well_formed()) return;
    for (int y = clipped.top; y < clipped.bottom; ++y)
        for (int x = clipped.left; x < clipped.right; ++x) set(x, y, c);
}

Image Image::crop_rows(int top, int rows) const {
    if (top < 0 || rows < 0 || top + rows > height_) throw PreconditionError("crop out of range");
    Image out;
    out.width_ = width_;
    out.height_ = rows;
    auto first = pixels_.begin() + static_cast<std::ptrdiff_t>(offset(0, top));
    out.pixels_.assign(first, first + static_cast<std::ptrdiff_t>(rows) * width_ * 3);
    return out;
}

void Image::append_rows(const Image& other, int from_row) {
    if (empty() && pixels_.empty()) width_ = other.width_;
    if (other.width_ != width_) throw PreconditionError("width mismatch");
    if (from_row < 0 || from_row > other.height_) throw PreconditionError("row out of range");
    auto first = other.pixels_.begin() + static_cast<std::ptrdiff_t>(other.offset(0, from_row));
    pixels_.insert(pixels_.end(), first, other.pixels_.end());
    height_ += other.height_ - from_row;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(std::string_view text) {
    return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string image_hash(const Image& img) {
    const std::array<std::uint8_t, 8> dims{
        static_cast<std::uint8_t>(img.width() >> 24), static_cast<std::uint8_t>(img.width() >> 16),
        static_cast<std::uint8_t>(img.width() >> 8), static_cast<std::uint8_t>(img.width()),
        static_cast<std::uint8_t>(img.height() >> 24), static_cast<std::uint8_t>(img.height() >> 16),
        static_cast<std::uint8_t>(img.height() >> 8), static_cast<std::uint8_t>(img.height())};
    return hex64(fnv1a64(img.bytes(), fnv1a64(dims)));
}

namespace {

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

[[noreturn]] void png_error_throw(png_structp, png_const_charp msg) {
    throw Error(std::string("png: ") + msg);
}

void png_warning_ignore(png_structp, png_const_charp) {}

struct ReadCursor {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->pos + length > cur->data.size()) png_error(png, "truncated data");
    std::memcpy(out, cur->data.data() + cur->pos, length);
    cur->pos += length;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
    std::vector<std::uint8_t> out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_throw,
                                              png_warning_ignore);
    if (!png) throw Error("png: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    try {
        png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
        png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_set_compression_level(png, 3);
        png_write_info(png, info);
        for (int y = 0; y < img.height(); ++y)
            png_write_row(png, const_cast<png_bytep>(img.row(y).data()));
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
    return out;
}

Image decode_png(std::span<const std::uint8_t> data) {
    if (data.size() < 8 || png_sig_cmp(data.data(), 0, 8) != 0) throw Error("png: bad signature");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_throw,
                                             png_warning_ignore);
    if (!png) throw Error("png: cannot create read struct");
    png_infop info = png_create_info_struct(png);
    ReadCursor cursor{data, 0};
    Image img;
    try {
        png_set_read_fn(png, &cursor, png_read_from_span);
        png_read_info(png, info);
        png_set_strip_16(png);
        png_set_strip_alpha(png);
        png_set_palette_to_rgb(png);
        png_set_gray_to_rgb(png);
        png_set_expand_gray_1_2_4_to_8(png);
        png_read_update_info(png, info);
        const int w = static_cast<int>(png_get_image_width(png, info));
        const int h = static_cast<int>(png_get_image_height(png, info));
        img = Image(w, h);
        for (int y = 0; y < h; ++y) png_read_row(png, img.row(y).data(), nullptr);
        png_read_end(png, nullptr);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const Image& img, const std::filesystem::path& path) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

}  // namespace dr
