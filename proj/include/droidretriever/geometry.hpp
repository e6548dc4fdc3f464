#pragma once

#include <algorithm>
#include <ostream>

namespace dr {

struct Point {
    int x = 0;
    int y = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

// Half-open pixel rectangle: [left, right) x [top, bottom).
struct Rect {
    int left = 0;
    int top = 0;
    int right = 0;
    int bottom = 0;

    int width() const { return right - left; }
    int height() const { return bottom - top; }
    long long area() const { return static_cast<long long>(width()) * height(); }
    bool well_formed() const { return left < right && top < bottom; }

    bool contains(Point p) const {
        return p.x >= left && p.x < right && p.y >= top && p.y < bottom;
    }

    // Arithmetic mean of the corners, rounded down.
    Point center() const { return {(left + right) / 2, (top + bottom) / 2}; }

    Rect shifted(int dx, int dy) const { return {left + dx, top + dy, right + dx, bottom + dy}; }

    Rect intersect(const Rect& o) const {
        return {std::max(left, o.left), std::max(top, o.top),
                std::min(right, o.right), std::min(bottom, o.bottom)};
    }

    bool intersects(const Rect& o) const { return intersect(o).well_formed(); }

    bool inside(const Rect& outer) const {
        return left >= outer.left && top >= outer.top &&
               right <= outer.right && bottom <= outer.bottom;
    }

    friend bool operator==(const Rect&, const Rect&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Rect& r) {
    return os << "(" << r.left << "," << r.top << "," << r.right << "," << r.bottom << ")";
}

inline std::ostream& operator<<(std::ostream& os, const Point& p) {
    return os << "(" << p.x << "," << p.y << ")";
}

}  // namespace dr
