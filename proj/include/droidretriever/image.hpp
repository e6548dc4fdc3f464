#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "droidretriever/geometry.hpp"

namespace dr {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Packed 8-bit RGB raster, row-major.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = {255, 255, 255});

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return width_ == 0 || height_ == 0; }

    Rgb at(int x, int y) const {
        const auto* p = &pixels_[offset(x, y)];
        return {p[0], p[1], p[2]};
    }
    void set(int x, int y, Rgb c) {
        auto* p = &pixels_[offset(x, y)];
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }

    std::span<const std::uint8_t> row(int y) const {
        return {pixels_.data() + offset(0, y), static_cast<std::size_t>(width_) * 3};
    }
    std::span<std::uint8_t> row(int y) {
        return {pixels_.data() + offset(0, y), static_cast<std::size_t>(width_) * 3};
    }
    std::span<const std::uint8_t> bytes() const { return pixels_; }

    void fill_rect(const Rect& r, Rgb c);

    // Rows [top, top + rows) as a new image. Throws if out of range.
    Image crop_rows(int top, int rows) const;

    // Appends rows [from_row, other.height()) of `other`. Widths must match.
    void append_rows(const Image& other, int from_row = 0);

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t offset(int x, int y) const {
        return (static_cast<std::size_t>(y) * width_ + x) * 3;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t value);

// Content hash of dimensions plus pixels, as 16 hex digits.
std::string image_hash(const Image& img);

std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(std::span<const std::uint8_t> data);
void write_png(const Image& img, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

// 5x7 bitmap text, scaled. Drawn glyphs are clipped to `clip`. Pixels are
// addressed in the caller's coordinate space shifted by (0, -origin_y) so the
// same call can paint a window of a larger virtual canvas.
void draw_text(Image& img, std::string_view text, int x, int y, int scale, Rgb color,
               const Rect& clip, int origin_y = 0);

int text_advance(int scale);

}  // namespace dr
