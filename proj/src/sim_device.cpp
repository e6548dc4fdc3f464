#include <algorithm>

#include "droidretriever/device.hpp"
#include "droidretriever/errors.hpp"

namespace dr {

nlohmann::json to_json(const DeviceState& s) {
    nlohmann::json stack = nlohmann::json::array();
    for (const auto& e : s.viewport.nav_stack)
        stack.push_back({{"app", e.app_id}, {"screen", e.screen_id}, {"scroll", e.scroll_offset}});
    return {
        {"width", s.viewport.width},
        {"height", s.viewport.height},
        {"scroll", s.viewport.scroll_offset},
        {"app", s.viewport.current_app ? nlohmann::json(*s.viewport.current_app) : nlohmann::json()},
        {"screen", s.viewport.current_screen ? nlohmann::json(*s.viewport.current_screen) : nlohmann::json()},
        {"nav_stack", stack},
        {"queries", s.queries},
        {"logged_in", s.logged_in},
        {"fields", s.fields},
        {"focused", s.focused ? nlohmann::json(*s.focused) : nlohmann::json()},
    };
}

DeviceState device_state_from_json(const nlohmann::json& j) {
    DeviceState s;
    s.viewport.width = j.at("width").get<int>();
    s.viewport.height = j.at("height").get<int>();
    s.viewport.scroll_offset = j.at("scroll").get<int>();
    if (!j.at("app").is_null()) s.viewport.current_app = j["app"].get<std::string>();
    if (!j.at("screen").is_null()) s.viewport.current_screen = j["screen"].get<std::string>();
    for (const auto& e : j.at("nav_stack"))
        s.viewport.nav_stack.push_back({e.at("app").get<std::string>(), e.at("screen").get<std::string>(),
                                        e.at("scroll").get<int>()});
    s.queries = j.at("queries").get<std::map<std::string, std::string>>();
    s.logged_in = j.at("logged_in").get<std::set<std::string>>();
    if (j.contains("fields")) s.fields = j["fields"].get<std::map<std::string, std::string>>();
    if (j.contains("focused") && !j["focused"].is_null()) s.focused = j["focused"].get<std::string>();
    return s;
}

SimDevice::SimDevice(std::shared_ptr<const Scenario> scenario) : scenario_(std::move(scenario)) {
    vp_.width = scenario_->device.width;
    vp_.height = scenario_->device.height;
}

const AppModel* SimDevice::current_app() const {
    if (!vp_.current_app) return nullptr;
    for (const auto& a : scenario_->apps)
        if (a.app_id == *vp_.current_app) return &a;
    return nullptr;
}

const ScreenModel* SimDevice::current_screen() const {
    const auto* app = current_app();
    if (!app || !vp_.current_screen) return nullptr;
    return &app->screen(*vp_.current_screen);
}

std::vector<ElementModel> SimDevice::current_elements() const {
    const auto* screen = current_screen();
    if (!screen) return {};
    std::vector<ElementModel> out = screen->elements;
    if (screen->kind != ScreenKind::results_list) return out;

    const auto* app = current_app();
    const auto q = queries_.find(app->app_id);
    const std::vector<ResultEntry>* entries = nullptr;
    if (q != queries_.end()) {
        auto it = app->search_index.find(normalize_text(q->second));
        if (it != app->search_index.end()) entries = &it->second;
    }
    const auto& lay = screen->results;
    if (!entries || entries->empty()) {
        out.push_back({"no_results", "No results", ElementKind::text,
                       {lay.margin, lay.top + 20, vp_.width - lay.margin, lay.top + lay.item_height - 20},
                       std::nullopt, std::nullopt});
        return out;
    }
    for (std::size_t i = 0; i < entries->size(); ++i) {
        const int y = lay.top + static_cast<int>(i) * lay.item_height;
        out.push_back({"result_" + std::to_string(i + 1), (*entries)[i].title, ElementKind::list_item,
                       {lay.margin, y + 20, vp_.width - lay.margin, y + lay.item_height - 20},
                       TapTarget{TapTarget::Action::navigate, (*entries)[i].detail_screen}, std::nullopt});
    }
    return out;
}

int SimDevice::canvas_height() const {
    const auto* screen = current_screen();
    if (!screen) return vp_.height;
    int h = screen->canvas_height;
    for (const auto& el : current_elements()) h = std::max(h, el.bbox.bottom + screen->results.margin);
    return h;
}

int SimDevice::max_scroll() const { return std::max(0, canvas_height() - vp_.height); }

std::optional<ScreenTruth> SimDevice::truth() const {
    const auto* screen = current_screen();
    ScreenTruth t;
    t.canvas_height = canvas_height();
    if (!screen) {
        t.kind = ScreenKind::home;
        t.screen_id = "launcher";
        return t;
    }
    t.app_id = *vp_.current_app;
    t.screen_id = screen->screen_id;
    t.kind = screen->kind;
    t.risk_category = screen->risk_category;
    for (const auto& el : current_elements()) {
        std::string text = el.text;
        if (el.element_kind == ElementKind::input) {
            auto f = fields_.find(t.app_id + "/" + t.screen_id + "/" + el.element_id);
            if (el.on_input && *el.on_input == "query") {
                auto q = queries_.find(t.app_id);
                if (f == fields_.end() && q != queries_.end() && !q->second.empty()) text = q->second;
            }
            if (f != fields_.end() && !f->second.empty()) text = el.on_input == "password" ? std::string(f->second.size(), '*') : f->second;
        }
        t.elements.push_back({text, el.element_kind, el.bbox});
    }
    return t;
}

std::vector<std::pair<std::string, std::string>> SimDevice::installed_apps() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& a : scenario_->apps) out.emplace_back(a.app_id, a.display_name);
    return out;
}

Image SimDevice::render_canvas(int top, int rows) const {
    const auto t = truth();
    return render_elements(t->elements, vp_.width, top, rows);
}

Image SimDevice::render_full_canvas() const { return render_canvas(0, canvas_height()); }

ScreenSnapshot SimDevice::render() const {
    ScreenSnapshot s;
    s.image = render_canvas(vp_.scroll_offset, vp_.height);
    s.snapshot_id = image_hash(s.image);
    s.scroll_offset = vp_.scroll_offset;
    return s;
}

void SimDevice::navigate(const std::string& screen_id) {
    vp_.nav_stack.push_back({*vp_.current_app, *vp_.current_screen, vp_.scroll_offset});
    vp_.current_screen = screen_id;
    vp_.scroll_offset = 0;
    focused_.reset();
}

void SimDevice::tap(Point p) {
    if (p.x < 0 || p.y < 0 || p.x >= vp_.width || p.y >= vp_.height) throw DeviceError("tap outside viewport");
    if (!current_screen()) return;
    const Point canvas{p.x, p.y + vp_.scroll_offset};
    const auto elements = current_elements();
    // Topmost element = last declared.
    auto hit = std::find_if(elements.rbegin(), elements.rend(),
                            [&](const ElementModel& e) { return e.bbox.contains(canvas); });
    if (hit == elements.rend()) return;
    if (hit->element_kind == ElementKind::input) focused_ = hit->element_id;
    if (!hit->on_tap) return;
    const auto& app = *current_app();
    switch (hit->on_tap->action) {
        case TapTarget::Action::navigate:
            navigate(hit->on_tap->target);
            break;
        case TapTarget::Action::search: {
            // Submit whatever the query-bound field on this screen holds.
            std::string query;
            for (const auto& e : elements) {
                if (!e.on_input || *e.on_input != "query") continue;
                auto f = fields_.find(app.app_id + "/" + *vp_.current_screen + "/" + e.element_id);
                if (f != fields_.end()) query = f->second;
            }
            queries_[app.app_id] = query;
            navigate(hit->on_tap->target);
            break;
        }
        case TapTarget::Action::login:
            logged_in_.insert(app.app_id);
            navigate(hit->on_tap->target);
            break;
        case TapTarget::Action::back:
            execute(ActionCommand::back());
            break;
    }
}

void SimDevice::open_app(const std::string& name) {
    const auto* app = scenario_->find_app(name);
    if (!app) throw DeviceError("app not installed: " + name);
    if (vp_.current_app && vp_.current_screen)
        vp_.nav_stack.push_back({*vp_.current_app, *vp_.current_screen, vp_.scroll_offset});
    vp_.current_app = app->app_id;
    vp_.current_screen = app->home_screen;
    if (app->requires_login && !logged_in_.count(app->app_id)) vp_.current_screen = app->login_screen()->screen_id;
    vp_.scroll_offset = 0;
    focused_.reset();
}

void SimDevice::execute(const ActionCommand& action) {
    if (const auto err = validate(action); !err.empty()) throw DeviceError("invalid action: " + err);
    switch (action.kind) {
        case ActionKind::tap:
            tap(*action.tap_point);
            break;
        case ActionKind::long_press:
            // No long-press bindings are modelled; the press only has to land on screen.
            if (action.tap_point->x < 0 || action.tap_point->y < 0 || action.tap_point->x >= vp_.width ||
                action.tap_point->y >= vp_.height)
                throw DeviceError("tap outside viewport");
            break;
        case ActionKind::input: {
            if (action.element_bbox && current_screen()) {
                const Point c = action.element_bbox->center();
                const Point canvas{c.x, c.y + vp_.scroll_offset};
                const auto elements = current_elements();
                auto hit = std::find_if(elements.rbegin(), elements.rend(), [&](const ElementModel& e) {
                    return e.bbox.contains(canvas) && e.element_kind == ElementKind::input;
                });
                if (hit != elements.rend()) focused_ = hit->element_id;
            }
            if (!focused_ || !current_screen()) throw DeviceError("no input target");
            fields_[*vp_.current_app + "/" + *vp_.current_screen + "/" + *focused_] = *action.input_text;
            break;
        }
        case ActionKind::scroll: {
            const int delta = action.scroll_delta.value_or(default_scroll_delta());
            const int signed_delta = action.direction == Direction::up ? -delta : delta;
            vp_.scroll_offset = std::clamp(vp_.scroll_offset + signed_delta, 0, max_scroll());
            break;
        }
        case ActionKind::swipe:
            // Horizontal; canvases are exactly one viewport wide.
            break;
        case ActionKind::open_app:
            open_app(*action.app_name);
            break;
        case ActionKind::back:
            if (vp_.nav_stack.empty()) break;
            vp_.current_app = vp_.nav_stack.back().app_id;
            vp_.current_screen = vp_.nav_stack.back().screen_id;
            vp_.scroll_offset = vp_.nav_stack.back().scroll_offset;
            vp_.nav_stack.pop_back();
            focused_.reset();
            break;
    }
}

DeviceState SimDevice::state() const { return {vp_, queries_, logged_in_, fields_, focused_}; }

void SimDevice::restore(const DeviceState& s) {
    vp_ = s.viewport;
    queries_ = s.queries;
    logged_in_ = s.logged_in;
    fields_ = s.fields;
    focused_ = s.focused;
}

}  // namespace dr
