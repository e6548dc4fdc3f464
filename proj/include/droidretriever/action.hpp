#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "droidretriever/geometry.hpp"

namespace dr {

enum class ActionKind { tap, input, scroll, swipe, long_press, open_app, back };

enum class Direction { up, down, left, right };

std::string_view to_string(ActionKind k);
std::string_view to_string(Direction d);
std::optional<ActionKind> action_kind_from(std::string_view s);
std::optional<Direction> direction_from(std::string_view s);

// One device action. Coordinates are viewport (screen) pixels.
struct ActionCommand {
    ActionKind kind = ActionKind::back;
    std::optional<Point> tap_point;
    std::optional<Rect> element_bbox;
    std::optional<std::string> input_text;
    std::optional<int> target_field;  // grounding index of the input field
    std::optional<Direction> direction;
    std::optional<int> scroll_delta;  // pixels; defaults to 2/3 viewport height
    std::optional<std::string> app_name;

    static ActionCommand tap(Point p) { return {.kind = ActionKind::tap, .tap_point = p}; }
    static ActionCommand back() { return {.kind = ActionKind::back}; }
    static ActionCommand open_app(std::string app) {
        return {.kind = ActionKind::open_app, .app_name = std::move(app)};
    }
    static ActionCommand scroll(Direction d, std::optional<int> delta = std::nullopt) {
        return {.kind = ActionKind::scroll, .direction = d, .scroll_delta = delta};
    }
    static ActionCommand input(std::string text, std::optional<Rect> field = std::nullopt) {
        return {.kind = ActionKind::input, .element_bbox = field, .input_text = std::move(text)};
    }

    friend bool operator==(const ActionCommand&, const ActionCommand&) = default;
};

// Empty string when the command satisfies the kind-specific field rules,
// otherwise the first violated rule.
std::string validate(const ActionCommand& cmd);

nlohmann::json to_json(const ActionCommand& cmd);
ActionCommand action_from_json(const nlohmann::json& j);

}  // namespace dr
