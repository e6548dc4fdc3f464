#include "droidretriever/navigator.hpp"

#include <cmath>
#include <sstream>

#include "droidretriever/errors.hpp"

namespace dr {

void ActionHistory::append(HistoryEntry entry) {
    if (!entries_.empty() && entry.step <= entries_.back().step)
        throw InvariantError("history step indices must strictly increase");
    entries_.push_back(std::move(entry));
}

void ActionHistory::add_action(const ActionCommand& cmd, std::string preview, std::string screen_id) {
    append({next_step(), cmd, std::move(preview), std::move(screen_id)});
}

void ActionHistory::add_intervention(int manual_steps, std::string screen_id) {
    append({next_step(), std::nullopt,
            "[user intervention: " + std::to_string(manual_steps) + " manual steps]", std::move(screen_id)});
}

std::string ActionHistory::render() const {
    if (entries_.empty()) return "none";
    std::string out;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (i) out += "; ";
        out += "step " + std::to_string(entries_[i].step) + ": " + entries_[i].summary;
    }
    return out;
}

namespace navigator {
namespace {

constexpr const char* kSystemPrompt =
    "You need to act as a smartphone assistant:\n"
    "I need to complete a task on a mobile app but am unsure how to proceed. Please tell me which element to tap "
    "or what content to enter based on the task, the controls I've tapped, and what I've entered on the keyboard.\n"
    "\n"
    "If I provide help document information, please refer to it first, but also take into account the actual "
    "interface, focusing on the real buttons. The interface I provide may not be the initial one, as some actions "
    "might have already been completed. Based on this, please determine the next step and provide a standardized "
    "operation command.";

constexpr const char* kSampleOutput =
    "Sample output format:\n"
    "{\n"
    "    \"action\": \"tap\",\n"
    "    \"tap_point\": [535, 1490],\n"
    "    \"element_location\": {\"left\": 475, \"right\": 595,\n"
    "                         \"top\": 1430, \"bottom\": 1550}\n"
    "}\n"
    "Other actions: {\"action\": \"input\", \"input_text\": \"...\", \"target_field\": <element index>}, "
    "{\"action\": \"scroll\", \"direction\": \"down\"}, {\"action\": \"swipe\", \"direction\": \"left\"}, "
    "{\"action\": \"long_press\", \"tap_point\": [x, y]}, {\"action\": \"open_app\", \"app_name\": \"...\"}, "
    "{\"action\": \"back\"}";

[[noreturn]] void fail(const std::string& reason, const std::string& raw) { throw ParseError("action", reason, raw); }

std::string_view json_block(const std::string& text) {
    const auto open = text.find('{');
    if (open == std::string::npos) fail("no JSON object found", text);
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return std::string_view(text).substr(open, i - open + 1);
    }
    fail("unbalanced braces", text);
}

int as_int(const nlohmann::json& v, const char* field, const std::string& raw) {
    if (v.is_number()) {
        const double d = v.get<double>();
        if (!std::isfinite(d) || std::abs(d) > 1e7) fail(std::string(field) + " out of range", raw);
        return static_cast<int>(std::lround(d));
    }
    if (v.is_string()) {
        try {
            std::size_t used = 0;
            const double d = std::stod(v.get<std::string>(), &used);
            if (used != v.get<std::string>().size() || !std::isfinite(d) || std::abs(d) > 1e7) throw std::invalid_argument("");
            return static_cast<int>(std::lround(d));
        } catch (const std::exception&) {
        }
    }
    fail(std::string(field) + " is not a number", raw);
}

Point read_point(const nlohmann::json& v, const std::string& raw) {
    if (v.is_array() && v.size() == 2) return {as_int(v[0], "tap_point", raw), as_int(v[1], "tap_point", raw)};
    if (v.is_object() && v.contains("x") && v.contains("y"))
        return {as_int(v["x"], "tap_point", raw), as_int(v["y"], "tap_point", raw)};
    fail("tap_point must be [x, y]", raw);
}

Rect read_rect(const nlohmann::json& v, const std::string& raw) {
    Rect r;
    if (v.is_object()) {
        for (const char* k : {"left", "top", "right", "bottom"})
            if (!v.contains(k)) fail(std::string("element_location missing ") + k, raw);
        r = {as_int(v["left"], "left", raw), as_int(v["top"], "top", raw), as_int(v["right"], "right", raw),
             as_int(v["bottom"], "bottom", raw)};
    } else if (v.is_array() && v.size() == 4) {
        r = {as_int(v[0], "left", raw), as_int(v[1], "top", raw), as_int(v[2], "right", raw),
             as_int(v[3], "bottom", raw)};
    } else {
        fail("element_location must be {left, top, right, bottom}", raw);
    }
    if (!r.well_formed()) fail("element_location is not a valid rectangle", raw);
    return r;
}

std::string str_field(const nlohmann::json& j, std::initializer_list<const char*> names) {
    for (const char* n : names)
        if (j.contains(n) && j[n].is_string()) return j[n].get<std::string>();
    return {};
}

// Element under a viewport point; the smallest containing box wins.
const UIElement* element_at(const UIGrounding& g, Point screen) {
    const Point canvas{screen.x, screen.y + g.scroll_offset};
    const UIElement* best = nullptr;
    for (const auto& e : g.elements)
        if (e.bbox.contains(canvas) && (!best || e.bbox.area() <= best->bbox.area())) best = &e;
    return best;
}

const UIElement* element_overlapping(const UIGrounding& g, const Rect& screen_box) {
    const Rect canvas = screen_box.shifted(0, g.scroll_offset);
    const UIElement* best = nullptr;
    long long best_area = 0;
    for (const auto& e : g.elements) {
        const auto a = e.bbox.intersect(canvas);
        if (a.well_formed() && a.area() > best_area) {
            best = &e;
            best_area = a.area();
        }
    }
    return best;
}

}  // namespace

LlmRequest build_prompt(const SubTask& subtask, const ActionHistory& history, const UIDescription& description,
                        const std::optional<std::string>& help_doc) {
    if (subtask.status != SubTaskStatus::running) throw PreconditionError("navigator prompt needs a running subtask");
    LlmRequest req;
    req.role = LlmRole::navigator;
    req.system_prompt = kSystemPrompt;
    std::string user = "Q: " + subtask.query_text + ", previous actions: " + history.render() +
                       "\nCurrent screenshot contains the following contents:\n" + description.text;
    if (!user.empty() && user.back() != '\n') user += '\n';
    if (help_doc && !trim(*help_doc).empty()) user += "You can refer to this help document: " + *help_doc + "\n";
    user += "\n";
    user += kSampleOutput;
    req.user_prompt = std::move(user);
    return req;
}

ParsedAction parse_action(const std::string& response_text) {
    if (trim(response_text).empty()) fail("empty response", response_text);
    const auto block = json_block(response_text);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(block);
    } catch (const nlohmann::json::exception& e) {
        fail(std::string("invalid JSON: ") + e.what(), response_text);
    }
    if (!j.is_object()) fail("action block is not an object", response_text);
    if (!j.contains("action") || !j["action"].is_string()) fail("missing \"action\"", response_text);
    const auto kind = action_kind_from(j["action"].get<std::string>());
    if (!kind) fail("unknown action \"" + j["action"].get<std::string>() + "\"", response_text);

    ParsedAction out;
    auto& cmd = out.command;
    cmd.kind = *kind;
    if (j.contains("element_location")) cmd.element_bbox = read_rect(j["element_location"], response_text);
    if (j.contains("tap_point")) cmd.tap_point = read_point(j["tap_point"], response_text);

    switch (cmd.kind) {
        case ActionKind::tap:
        case ActionKind::long_press:
            if (!cmd.tap_point && !cmd.element_bbox) fail("tap needs tap_point or element_location", response_text);
            if (!cmd.tap_point) {
                cmd.tap_point = cmd.element_bbox->center();
            } else if (cmd.element_bbox && !cmd.element_bbox->contains(*cmd.tap_point)) {
                std::ostringstream w;
                w << "tap_point " << *cmd.tap_point << " outside element_location " << *cmd.element_bbox
                  << "; using centre";
                out.warnings.push_back(w.str());
                cmd.tap_point = cmd.element_bbox->center();
            }
            break;
        case ActionKind::input: {
            const auto text = str_field(j, {"input_text", "text", "content", "value"});
            if (!j.contains("input_text") && !j.contains("text") && !j.contains("content") && !j.contains("value"))
                fail("input needs input_text", response_text);
            cmd.input_text = text;
            if (j.contains("target_field")) {
                cmd.target_field = as_int(j["target_field"], "target_field", response_text);
                if (*cmd.target_field < 1) fail("target_field must be a positive element index", response_text);
            }
            if (!cmd.target_field && !cmd.element_bbox) fail("input needs target_field or element_location", response_text);
            break;
        }
        case ActionKind::scroll:
        case ActionKind::swipe: {
            const auto d = str_field(j, {"direction", "scroll_direction"});
            if (!d.empty()) {
                cmd.direction = direction_from(d);
                if (!cmd.direction) fail("unknown direction \"" + d + "\"", response_text);
            } else {
                cmd.direction = cmd.kind == ActionKind::scroll ? Direction::down : Direction::left;
            }
            cmd.tap_point.reset();
            cmd.element_bbox.reset();
            break;
        }
        case ActionKind::open_app: {
            const auto app = str_field(j, {"app_name", "app", "name"});
            if (trim(app).empty()) fail("open_app needs app_name", response_text);
            cmd.app_name = trim(app);
            cmd.tap_point.reset();
            cmd.element_bbox.reset();
            break;
        }
        case ActionKind::back:
            cmd.tap_point.reset();
            cmd.element_bbox.reset();
            break;
    }
    if (const auto err = validate(cmd); !err.empty()) fail(err, response_text);
    return out;
}

PreviewedAction resolve_and_preview(const ActionCommand& cmd, const UIGrounding& grounding) {
    if (const auto err = validate(cmd); !err.empty()) throw PreconditionError("invalid action: " + err);
    PreviewedAction out;
    out.command = cmd;
    auto bind = [&](const UIElement* e) {
        if (!e) return;
        out.highlight = e->bbox;
        out.element_index = e->index;
        out.element_text = e->text;
    };
    switch (cmd.kind) {
        case ActionKind::tap:
        case ActionKind::long_press: {
            const UIElement* e = element_at(grounding, *cmd.tap_point);
            if (!e && cmd.element_bbox) e = element_overlapping(grounding, *cmd.element_bbox);
            if (!e && !cmd.element_bbox) {
                std::ostringstream os;
                os << "ungrounded tap at " << *cmd.tap_point;
                throw GroundingError(os.str());
            }
            bind(e);
            const char* verb = cmd.kind == ActionKind::tap ? "Tap" : "Long press";
            if (e) {
                out.preview = std::string(verb) + " [" + e->text + "]";
            } else {
                std::ostringstream os;
                os << verb << " " << *cmd.tap_point;
                out.preview = os.str();
                out.highlight = cmd.element_bbox->shifted(0, grounding.scroll_offset);
            }
            break;
        }
        case ActionKind::input: {
            const UIElement* e = nullptr;
            if (cmd.target_field) {
                e = grounding.find(*cmd.target_field);
                if (!e) throw GroundingError("unknown target field " + std::to_string(*cmd.target_field));
            } else {
                e = element_overlapping(grounding, *cmd.element_bbox);
                if (!e) throw GroundingError("input field not found on screen");
            }
            bind(e);
            out.command.target_field = e->index;
            const Rect viewport{0, 0, grounding.viewport_width, grounding.viewport_height};
            Rect screen_box = grounding.to_screen(e->bbox).intersect(viewport);
            if (!screen_box.well_formed()) screen_box = grounding.to_screen(e->bbox);
            out.command.element_bbox = screen_box;
            out.preview = "Enter [" + *cmd.input_text + "] in the [" + e->text + "] field";
            break;
        }
        case ActionKind::scroll:
            out.preview = std::string("Scroll ") + std::string(to_string(cmd.direction.value_or(Direction::down)));
            break;
        case ActionKind::swipe:
            out.preview = std::string("Swipe ") + std::string(to_string(cmd.direction.value_or(Direction::left)));
            break;
        case ActionKind::open_app:
            out.preview = "Open [" + *cmd.app_name + "]";
            break;
        case ActionKind::back:
            out.preview = "Back";
            break;
    }
    return out;
}

}  // namespace navigator
}  // namespace dr
