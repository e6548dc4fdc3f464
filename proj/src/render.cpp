#include <cstdint>

#include "droidretriever/device.hpp"

namespace dr {
namespace {

// Low-amplitude texture keyed by canvas coordinates, so every canvas row is
// distinguishable when overlapping viewport captures are aligned.
Rgb background(int x, int y) {
    std::uint32_t h = static_cast<std::uint32_t>(x) * 0x9E3779B1u ^ static_cast<std::uint32_t>(y) * 0x85EBCA77u;
    h ^= h >> 15;
    h *= 0x2C1B3C6Du;
    h ^= h >> 12;
    const auto d = static_cast<std::uint8_t>(h & 0x0F);
    return {static_cast<std::uint8_t>(236 + d), static_cast<std::uint8_t>(238 + d), static_cast<std::uint8_t>(240 + d)};
}

struct Style {
    Rgb fill;
    Rgb border;
    Rgb ink;
};

Style style_for(ElementKind k) {
    switch (k) {
        case ElementKind::button: return {{66, 103, 178}, {32, 58, 120}, {255, 255, 255}};
        case ElementKind::input: return {{255, 255, 255}, {120, 120, 120}, {60, 60, 60}};
        case ElementKind::icon: return {{250, 214, 120}, {170, 130, 40}, {40, 40, 40}};
        case ElementKind::list_item: return {{252, 252, 252}, {200, 200, 205}, {20, 20, 20}};
        case ElementKind::text: return {{244, 244, 246}, {225, 225, 228}, {30, 30, 30}};
    }
    return {{255, 255, 255}, {0, 0, 0}, {0, 0, 0}};
}

constexpr int kBorder = 3;
constexpr int kTextScale = 3;

}  // namespace

Image render_elements(const std::vector<TruthElement>& elements, int width, int top, int rows) {
    Image img(width, rows);
    for (int y = 0; y < rows; ++y) {
        auto row = img.row(y);
        for (int x = 0; x < width; ++x) {
            const Rgb c = background(x, top + y);
            row[static_cast<std::size_t>(x) * 3] = c.r;
            row[static_cast<std::size_t>(x) * 3 + 1] = c.g;
            row[static_cast<std::size_t>(x) * 3 + 2] = c.b;
        }
    }
    const Rect window{0, top, width, top + rows};
    for (const auto& el : elements) {
        if (!el.bbox.intersects(window)) continue;
        const Style st = style_for(el.kind);
        img.fill_rect(el.bbox.shifted(0, -top), st.border);
        const Rect inner{el.bbox.left + kBorder, el.bbox.top + kBorder, el.bbox.right - kBorder,
                         el.bbox.bottom - kBorder};
        if (inner.well_formed()) {
            img.fill_rect(inner.shifted(0, -top), st.fill);
            const int glyph_h = 7 * kTextScale;
            const int ty = inner.top + std::max(0, (inner.height() - glyph_h) / 2);
            draw_text(img, el.text, inner.left + 12, ty, kTextScale, st.ink, inner, top);
        }
    }
    return img;
}

}  // namespace dr
