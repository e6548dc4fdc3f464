#include <array>
#include <cctype>
#include <string_view>

#include "droidretriever/image.hpp"

namespace dr {
namespace {

constexpr int kGlyphW = 5;
constexpr int kGlyphH = 7;

struct Glyph {
    char ch;
    std::string_view rows;  // 35 chars, '#' = ink
};

// clang-format off
constexpr std::array kGlyphs{
    Glyph{'A', ".###.#...##...#######...##...##...#"},
    Glyph{'B', "####.#...##...#####.#...##...#####."},
    Glyph{'C', ".###.#...##....#....#....#...#.###."},
    Glyph{'D', "####.#...##...##...##...##...#####."},
    Glyph{'E', "######....#....####.#....#....#####"},
    Glyph{'F', "######....#....####.#....#....#...."},
    Glyph{'G', ".###.#...##....#.####...##...#.####"},
    Glyph{'H', "#...##...##...#######...##...##...#"},
    Glyph{'I', ".###...#....#....#....#....#...###."},
    Glyph{'J', "..###...#....#....#....##..#..##..."},
    Glyph{'K', "#...##..#.#.#..##...#.#..#..#.#...#"},
    Glyph{'L', "#....#....#....#....#....#....#####"},
    Glyph{'M', "#...###.###.#.##...##...##...##...#"},
    Glyph{'N', "#...###..##.#.##..###...##...##...#"},
    Glyph{'O', ".###.#...##...##...##...##...#.###."},
    Glyph{'P', "####.#...##...#####.#....#....#...."},
    Glyph{'Q', ".###.#...##...##...##.#.##..#..##.#"},
    Glyph{'R', "####.#...##...#####.#.#..#..#.#...#"},
    Glyph{'S', ".####.....#.....###.....#....#####."},
    Glyph{'T', "#####..#....#....#....#....#....#.."},
    Glyph{'U', "#...##...##...##...##...##...#.###."},
    Glyph{'V', "#...##...##...##...##...#.#.#...#.."},
    Glyph{'W', "#...##...##...##.#.##.#.##.#.#.#.#."},
    Glyph{'X', "#...##...#.#.#...#...#.#.#...##...#"},
    Glyph{'Y', "#...##...#.#.#...#....#....#....#.."},
    Glyph{'Z', "#####....#...#...#...#...#....#####"},
    Glyph{'0', ".###.#...##..###.#.###..##...#.###."},
    Glyph{'1', "..#...##....#....#....#....#...###."},
    Glyph{'2', ".###.#...#....#...#...#...#...#####"},
    Glyph{'3', "#####...#...#.....#.....##...#.###."},
    Glyph{'4', "...#...##..#.#.#..#.#####...#....#."},
    Glyph{'5', "######....####.....#....##...#.###."},
    Glyph{'6', "..##..#...#....####.#...##...#.###."},
    Glyph{'7', "#####....#...#...#...#....#....#..."},
    Glyph{'8', ".###.#...##...#.###.#...##...#.###."},
    Glyph{'9', ".###.#...##...#.####....#...#..##.."},
    Glyph{'.', "..............................##..."},
    Glyph{',', ".........................##...#..#."},
    Glyph{':', ".....##...##.........##...##......."},
    Glyph{';', ".....##...##.........##....#...#..."},
    Glyph{'!', "..#....#....#....#....#.........#.."},
    Glyph{'?', ".###.#...#....#...#...#.........#.."},
    Glyph{'-', "...............###................."},
    Glyph{'+', ".......#....#..#####..#....#......."},
    Glyph{'=', "..........#####.....#####.........."},
    Glyph{'/', ".....#...#...#...#...#............."},
    Glyph{'(', "...#...#...#....#....#.....#.....#."},
    Glyph{')', ".#.....#.....#....#....#...#...#..."},
    Glyph{'[', ".###..#....#....#....#....#....###."},
    Glyph{']', ".###....#....#....#....#....#..###."},
    Glyph{'\'', "..#....#...#......................."},
    Glyph{'"', ".#.#..#.#.#.#......................"},
    Glyph{'$', "..#...####.#...###...#.####...#...."},
    Glyph{'%', "##...##..#...#...#...#...#..##...##"},
    Glyph{'&', ".##..#..#.#.#...#...#.#.##..#..##.#"},
    Glyph{'*', ".......#..#.#.#.###.#.#.#..#......."},
    Glyph{'#', ".#.#..#.#.#####.#.#.#####.#.#..#.#."},
    Glyph{'@', ".###.#...#....#.##.##.#.##.#.#.###."},
    Glyph{'_', "..............................#####"},
    Glyph{'<', "...#...#...#...#.....#.....#.....#."},
    Glyph{'>', ".#.....#.....#.....#...#...#...#..."},
    Glyph{'~', "..........#.#.#.#.#................"},
    Glyph{'|', "..#....#....#....#....#....#....#.."},
};
// Shown for any byte without a glyph (including UTF-8 continuation sequences).
constexpr std::string_view kBox = "######...##...##...##...##...######";
// clang-format on

std::string_view glyph_rows(unsigned char c) {
    const char up = static_cast<char>(std::toupper(c));
    for (const auto& g : kGlyphs)
        if (g.ch == up) return g.rows;
    return kBox;
}

}  // namespace

int text_advance(int scale) { return (kGlyphW + 1) * scale; }

void draw_text(Image& img, std::string_view text, int x, int y, int scale, Rgb color,
               const Rect& clip, int origin_y) {
    const Rect window = clip.intersect({0, origin_y, img.width(), origin_y + img.height()});
    if (!window.well_formed()) return;
    int pen = x;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (c >= 0x80) {
            // Collapse one multi-byte UTF-8 sequence into a single box glyph.
            while (i + 1 < text.size() && (static_cast<unsigned char>(text[i + 1]) & 0xC0) == 0x80) ++i;
        }
        if (pen >= window.right) break;
        if (c != ' ') {
            const auto rows = glyph_rows(c);
            for (int gy = 0; gy < kGlyphH; ++gy) {
                for (int gx = 0; gx < kGlyphW; ++gx) {
                    if (rows[static_cast<std::size_t>(gy * kGlyphW + gx)] != '#') continue;
                    const Rect cell = Rect{pen + gx * scale, y + gy * scale,
                                           pen + (gx + 1) * scale, y + (gy + 1) * scale}
                                          .intersect(window);
                    for (int py = cell.top; py < cell.bottom; ++py)
                        for (int px = cell.left; px < cell.right; ++px) img.set(px, py - origin_y, color);
                }
            }
        }
        pen += text_advance(scale);
    }
}

}  // namespace dr
