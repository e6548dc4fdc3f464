#include "droidretriever/action.hpp"

#include "droidretriever/domain.hpp"
#include "droidretriever/errors.hpp"

namespace dr {

std::string_view to_string(ActionKind k) {
    switch (k) {
        case ActionKind::tap: return "tap";
        case ActionKind::input: return "input";
        case ActionKind::scroll: return "scroll";
        case ActionKind::swipe: return "swipe";
        case ActionKind::long_press: return "long_press";
        case ActionKind::open_app: return "open_app";
        case ActionKind::back: return "back";
    }
    return "back";
}

std::string_view to_string(Direction d) {
    switch (d) {
        case Direction::up: return "up";
        case Direction::down: return "down";
        case Direction::left: return "left";
        case Direction::right: return "right";
    }
    return "down";
}

std::optional<ActionKind> action_kind_from(std::string_view s) {
    std::string key;
    for (char c : to_lower(trim(s))) key += (c == ' ' || c == '-') ? '_' : c;
    if (key == "tap" || key == "click") return ActionKind::tap;
    if (key == "input" || key == "type" || key == "enter") return ActionKind::input;
    if (key == "scroll") return ActionKind::scroll;
    if (key == "swipe") return ActionKind::swipe;
    if (key == "long_press" || key == "longpress") return ActionKind::long_press;
    if (key == "open_app" || key == "openapp" || key == "open") return ActionKind::open_app;
    if (key == "back") return ActionKind::back;
    return std::nullopt;
}

std::optional<Direction> direction_from(std::string_view s) {
    const auto key = to_lower(trim(s));
    if (key == "up") return Direction::up;
    if (key == "down") return Direction::down;
    if (key == "left") return Direction::left;
    if (key == "right") return Direction::right;
    return std::nullopt;
}

std::string validate(const ActionCommand& cmd) {
    if (cmd.element_bbox && !cmd.element_bbox->well_formed()) return "element bbox is not well-formed";
    switch (cmd.kind) {
        case ActionKind::tap:
        case ActionKind::long_press:
            if (!cmd.tap_point) return "tap requires tap_point";
            if (cmd.element_bbox && !cmd.element_bbox->contains(*cmd.tap_point))
                return "tap_point outside element bbox";
            return {};
        case ActionKind::input:
            if (!cmd.input_text) return "input requires input_text";
            if (!cmd.target_field && !cmd.element_bbox) return "input requires target_field";
            return {};
        case ActionKind::open_app:
            if (!cmd.app_name || cmd.app_name->empty()) return "open_app requires app_name";
            return {};
        case ActionKind::scroll:
            if (cmd.direction && *cmd.direction != Direction::up && *cmd.direction != Direction::down)
                return "scroll direction must be up or down";
            if (cmd.scroll_delta && *cmd.scroll_delta < 0) return "negative scroll delta";
            return {};
        case ActionKind::swipe:
            if (cmd.direction && *cmd.direction != Direction::left && *cmd.direction != Direction::right)
                return "swipe direction must be left or right";
            return {};
        case ActionKind::back:
            return {};
    }
    return {};
}

nlohmann::json to_json(const ActionCommand& cmd) {
    nlohmann::json j;
    j["action"] = to_string(cmd.kind);
    if (cmd.tap_point) j["tap_point"] = {cmd.tap_point->x, cmd.tap_point->y};
    if (cmd.element_bbox)
        j["element_location"] = {{"left", cmd.element_bbox->left}, {"top", cmd.element_bbox->top},
                                 {"right", cmd.element_bbox->right}, {"bottom", cmd.element_bbox->bottom}};
    if (cmd.input_text) j["input_text"] = *cmd.input_text;
    if (cmd.target_field) j["target_field"] = *cmd.target_field;
    if (cmd.direction) j["direction"] = to_string(*cmd.direction);
    if (cmd.scroll_delta) j["scroll_delta"] = *cmd.scroll_delta;
    if (cmd.app_name) j["app_name"] = *cmd.app_name;
    return j;
}

ActionCommand action_from_json(const nlohmann::json& j) {
    ActionCommand cmd;
    const auto kind = action_kind_from(j.at("action").get<std::string>());
    if (!kind) throw Error("unknown action in trace: " + j.at("action").dump());
    cmd.kind = *kind;
    if (j.contains("tap_point")) cmd.tap_point = Point{j["tap_point"][0].get<int>(), j["tap_point"][1].get<int>()};
    if (j.contains("element_location")) {
        const auto& e = j["element_location"];
        cmd.element_bbox = Rect{e.at("left").get<int>(), e.at("top").get<int>(), e.at("right").get<int>(),
                                e.at("bottom").get<int>()};
    }
    if (j.contains("input_text")) cmd.input_text = j["input_text"].get<std::string>();
    if (j.contains("target_field")) cmd.target_field = j["target_field"].get<int>();
    if (j.contains("direction")) cmd.direction = direction_from(j["direction"].get<std::string>());
    if (j.contains("scroll_delta")) cmd.scroll_delta = j["scroll_delta"].get<int>();
    if (j.contains("app_name")) cmd.app_name = j["app_name"].get<std::string>();
    return cmd;
}

}  // namespace dr
