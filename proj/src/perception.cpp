#include "droidretriever/perception.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

namespace dr {

const UIElement* UIGrounding::find(int index) const {
    for (const auto& e : elements)
        if (e.index == index) return &e;
    return nullptr;
}

UIGrounding build_grounding(std::string screen_ref, const std::vector<TruthElement>& elements, int width,
                            int height, int scroll_offset, std::optional<ScreenKind> kind) {
    UIGrounding g;
    g.screen_ref = std::move(screen_ref);
    g.viewport_width = width;
    g.viewport_height = height;
    g.scroll_offset = scroll_offset;
    g.screen_kind = kind;
    const Rect window{0, scroll_offset, width, scroll_offset + height};
    std::vector<const TruthElement*> visible;
    for (const auto& e : elements)
        if (e.bbox.well_formed() && e.bbox.intersects(window)) visible.push_back(&e);
    std::stable_sort(visible.begin(), visible.end(), [](const TruthElement* a, const TruthElement* b) {
        if (a->bbox.top != b->bbox.top) return a->bbox.top < b->bbox.top;
        return a->bbox.left < b->bbox.left;
    });
    int index = 1;
    for (const auto* e : visible) g.elements.push_back({index++, e->text, e->kind, e->bbox, false});
    return g;
}

Perception perceive(const ScreenSnapshot& snapshot, const std::optional<ScreenTruth>& truth,
                    int viewport_width, int viewport_height, Perceiver* perceiver) {
    std::vector<TruthElement> elements;
    std::optional<ScreenKind> kind;
    if (truth) {
        elements = truth->elements;
        if (!truth->screen_id.empty() && truth->screen_id != "launcher") kind = truth->kind;
    } else if (perceiver) {
        // Detectors see viewport pixels; lift their boxes into canvas coordinates.
        for (auto e : perceiver->detect(snapshot.image)) {
            e.bbox = e.bbox.shifted(0, snapshot.scroll_offset);
            elements.push_back(std::move(e));
        }
    }
    Perception p;
    p.grounding = build_grounding(snapshot.snapshot_id, elements, viewport_width, viewport_height,
                                  snapshot.scroll_offset, kind);
    p.description = describe(p.grounding);
    return p;
}

UIDescription describe(const UIGrounding& g) {
    if (g.elements.empty()) return {"[empty screen]"};
    std::ostringstream os;
    os << "[screen] " << (g.screen_kind ? to_string(*g.screen_kind) : std::string_view("generic")) << "\n";
    const Rect window{0, 0, g.viewport_width, g.viewport_height};
    for (const auto& e : g.elements) {
        Rect vis = g.to_screen(e.bbox).intersect(window);
        if (!vis.well_formed()) vis = g.to_screen(e.bbox);
        const Point c = vis.center();
        os << "[" << e.index << "] " << to_string(e.element_kind) << " \"" << e.text << "\" @ (" << c.x << ","
           << c.y << ")";
        if (e.visited_mask) os << " (visited)";
        os << "\n";
    }
    return {os.str()};
}

std::string element_key(const std::string& text) { return normalize_text(text); }

UIGrounding mask_visited(const UIGrounding& g, const std::set<std::string>& visited_keys) {
    UIGrounding out = g;
    if (visited_keys.empty()) return out;
    for (auto& e : out.elements)
        if (visited_keys.count(element_key(e.text))) e.visited_mask = true;
    return out;
}

std::vector<int> description_indices(const std::string& description) {
    static const std::regex line_re(R"(^\[(\d+)\] \w+ ".*" @ \(-?\d+,-?\d+\)( \(visited\))?$)");
    std::vector<int> out;
    std::istringstream in(description);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (std::regex_match(line, m, line_re)) out.push_back(std::stoi(m[1]));
    }
    return out;
}

}  // namespace dr
