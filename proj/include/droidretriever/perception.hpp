#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "droidretriever/device.hpp"

namespace dr {

struct UIElement {
    int index = 0;  // 1-based, contiguous within one grounding
    std::string text;
    ElementKind element_kind = ElementKind::text;
    Rect bbox;  // canvas coordinates
    bool visited_mask = false;

    friend bool operator==(const UIElement&, const UIElement&) = default;
};

struct UIGrounding {
    std::string screen_ref;
    std::vector<UIElement> elements;
    int viewport_width = 0;
    int viewport_height = 0;
    int scroll_offset = 0;  // canvas row shown at the top of the viewport
    std::optional<ScreenKind> screen_kind;

    const UIElement* find(int index) const;
    // Element bbox in viewport coordinates (canvas bbox minus scroll offset).
    Rect to_screen(const Rect& canvas) const { return canvas.shifted(0, -scroll_offset); }

    friend bool operator==(const UIGrounding&, const UIGrounding&) = default;
};

struct UIDescription {
    std::string text;
};

// Pluggable element detector standing in for a vision stack on real devices.
class Perceiver {
public:
    virtual ~Perceiver() = default;
    virtual std::vector<TruthElement> detect(const Image& screenshot) = 0;
};

struct Perception {
    UIDescription description;
    UIGrounding grounding;
};

// Builds grounding from ground truth when given, otherwise from `perceiver`.
// Elements are ordered top-to-bottom, then left-to-right; those outside the
// viewport window are dropped.
Perception perceive(const ScreenSnapshot& snapshot, const std::optional<ScreenTruth>& truth,
                    int viewport_width, int viewport_height, Perceiver* perceiver = nullptr);

// Grounding over an arbitrary element list (e.g. a stitched long image).
UIGrounding build_grounding(std::string screen_ref, const std::vector<TruthElement>& elements, int width,
                            int height, int scroll_offset, std::optional<ScreenKind> kind);

// Canonical description grammar, one element per line:
//   [screen] <kind>
//   [i] <kind> "<text>" @ (cx,cy)[ (visited)]
// Centres are viewport coordinates. An empty grounding yields "[empty screen]".
UIDescription describe(const UIGrounding& g);

// Key used for visited-result tracking.
std::string element_key(const std::string& text);

UIGrounding mask_visited(const UIGrounding& g, const std::set<std::string>& visited_keys);

// Indices that appear as element lines in a description.
std::vector<int> description_indices(const std::string& description);

}  // namespace dr
