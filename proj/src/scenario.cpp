#include "droidretriever/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "droidretriever/errors.hpp"

namespace dr {

const ScreenModel& AppModel::screen(const std::string& id) const {
    auto it = screens.find(id);
    if (it == screens.end()) throw InvariantError("app " + app_id + " has no screen " + id);
    return it->second;
}

const ScreenModel* AppModel::login_screen() const {
    for (const auto& [id, s] : screens)
        if (s.kind == ScreenKind::risk && s.risk_category == RiskCategory::login_identity) return &s;
    return nullptr;
}

const AppModel* Scenario::find_app(std::string_view name) const {
    const auto key = normalize_text(name);
    for (const auto& app : apps)
        if (normalize_text(app.app_id) == key || normalize_text(app.package_name) == key ||
            normalize_text(app.display_name) == key)
            return &app;
    return nullptr;
}

std::size_t Scenario::screen_count() const {
    std::size_t n = 0;
    for (const auto& app : apps) n += app.screens.size();
    return n;
}

namespace {

class Loader {
public:
    explicit Loader(std::string file) : file_(std::move(file)) {}

    Scenario load(const YAML::Node& root) {
        if (!root || !root.IsMap()) fail("<root>", "document must be a mapping");
        Scenario sc;
        sc.name = root["name"] ? scalar(root["name"], "name") : "scenario";
        if (const auto dev = root["device"]) {
            if (!dev.IsMap()) fail("device", "must be a mapping");
            if (dev["width"]) sc.device.width = integer(dev["width"], "device.width");
            if (dev["height"]) sc.device.height = integer(dev["height"], "device.height");
        }
        if (sc.device.width <= 0 || sc.device.height <= 0) fail("device", "width and height must be positive");
        device_ = sc.device;

        const auto apps = root["apps"];
        if (!apps || !apps.IsSequence()) fail("apps", "required list");
        std::set<std::string> ids;
        for (std::size_t i = 0; i < apps.size(); ++i) {
            auto app = load_app(apps[i], "apps[" + std::to_string(i) + "]");
            if (!ids.insert(app.app_id).second) fail("apps[" + std::to_string(i) + "].app_id", "duplicate app_id " + app.app_id);
            sc.apps.push_back(std::move(app));
        }

        if (const auto pol = root["policies"]) {
            if (!pol.IsMap()) fail("policies", "must be a mapping");
            for (const auto& kv : pol) {
                const auto key = kv.first.as<std::string>();
                const std::string path = "policies." + key;
                if (key == "operator") {
                    sc.operator_script = load_operator(kv.second, path);
                    continue;
                }
                const auto role = llm_role_from(key);
                if (!role) fail(path, "unknown policy role");
                sc.policies[*role] = load_policy(*role, kv.second, path);
            }
        }
        return sc;
    }

private:
    [[noreturn]] void fail(const std::string& field, const std::string& rule) const {
        throw ScenarioError(file_, field, rule);
    }

    std::string scalar(const YAML::Node& n, const std::string& field) const {
        if (!n || !n.IsScalar()) fail(field, "expected a scalar");
        return n.as<std::string>();
    }

    int integer(const YAML::Node& n, const std::string& field) const {
        try {
            return n.as<int>();
        } catch (const YAML::Exception&) {
            fail(field, "expected an integer");
        }
    }

    std::vector<std::string> string_list(const YAML::Node& n, const std::string& field) const {
        std::vector<std::string> out;
        if (!n) return out;
        if (n.IsScalar()) return {n.as<std::string>()};
        if (!n.IsSequence()) fail(field, "expected a string or list of strings");
        for (std::size_t i = 0; i < n.size(); ++i) out.push_back(scalar(n[i], field + "[" + std::to_string(i) + "]"));
        return out;
    }

    AppModel load_app(const YAML::Node& n, const std::string& path) {
        if (!n.IsMap()) fail(path, "must be a mapping");
        AppModel app;
        app.app_id = scalar(n["app_id"], path + ".app_id");
        if (app.app_id.empty()) fail(path + ".app_id", "must be non-empty");
        app.display_name = n["display_name"] ? scalar(n["display_name"], path + ".display_name") : app.app_id;
        app.package_name = n["package_name"] ? scalar(n["package_name"], path + ".package_name") : "";
        app.home_screen = scalar(n["home_screen"], path + ".home_screen");
        app.requires_login = n["requires_login"] && n["requires_login"].as<bool>();
        if (n["help_doc"]) app.help_doc = scalar(n["help_doc"], path + ".help_doc");

        const auto screens = n["screens"];
        if (!screens || !screens.IsSequence() || screens.size() == 0) fail(path + ".screens", "required non-empty list");
        for (std::size_t i = 0; i < screens.size(); ++i) {
            auto s = load_screen(screens[i], path + ".screens[" + std::to_string(i) + "]");
            const auto id = s.screen_id;
            if (!app.screens.emplace(id, std::move(s)).second)
                fail(path + ".screens[" + std::to_string(i) + "]", "duplicate screen_id " + id);
        }
        if (!app.screens.count(app.home_screen)) fail(path + ".home_screen", "broken transition: " + app.home_screen);

        if (const auto idx = n["search_index"]) {
            if (!idx.IsMap()) fail(path + ".search_index", "must be a mapping");
            for (const auto& kv : idx) {
                const auto query = kv.first.as<std::string>();
                const std::string qpath = path + ".search_index." + query;
                if (!kv.second.IsSequence()) fail(qpath, "expected a list of results");
                std::vector<ResultEntry> entries;
                for (std::size_t i = 0; i < kv.second.size(); ++i) {
                    const auto& e = kv.second[i];
                    const std::string epath = qpath + "[" + std::to_string(i) + "]";
                    ResultEntry r{scalar(e["title"], epath + ".title"), scalar(e["detail"], epath + ".detail")};
                    if (!app.screens.count(r.detail_screen)) fail(epath + ".detail", "broken transition: " + r.detail_screen);
                    entries.push_back(std::move(r));
                }
                app.search_index[normalize_text(query)] = std::move(entries);
            }
        }

        // Transition targets are checked once every screen of the app is known.
        for (const auto& [sid, s] : app.screens) {
            for (std::size_t i = 0; i < s.elements.size(); ++i) {
                const auto& el = s.elements[i];
                if (!el.on_tap || el.on_tap->action == TapTarget::Action::back) continue;
                if (!app.screens.count(el.on_tap->target))
                    fail(path + ".screens." + sid + ".elements[" + std::to_string(i) + "].on_tap",
                         "broken transition: " + el.on_tap->target);
                if (el.on_tap->action == TapTarget::Action::search &&
                    app.screen(el.on_tap->target).kind != ScreenKind::results_list)
                    fail(path + ".screens." + sid + ".elements[" + std::to_string(i) + "].on_tap",
                         "search target must be a results_list screen");
            }
        }
        if (app.requires_login && !app.login_screen())
            fail(path + ".requires_login", "requires a risk screen with risk_category login_identity");
        return app;
    }

    ScreenModel load_screen(const YAML::Node& n, const std::string& path) {
        if (!n.IsMap()) fail(path, "must be a mapping");
        ScreenModel s;
        s.screen_id = scalar(n["screen_id"], path + ".screen_id");
        if (n["kind"]) {
            const auto kind = screen_kind_from(scalar(n["kind"], path + ".kind"));
            if (!kind) fail(path + ".kind", "unknown screen kind");
            s.kind = *kind;
        }
        s.canvas_height = n["canvas_height"] ? integer(n["canvas_height"], path + ".canvas_height") : device_.height;
        if (s.canvas_height < device_.height) fail(path + ".canvas_height", "must be >= viewport height");
        if (n["risk_category"]) {
            const auto cat = risk_category_from(scalar(n["risk_category"], path + ".risk_category"));
            if (!cat) fail(path + ".risk_category", "unknown risk category");
            s.risk_category = cat;
        }
        if (s.kind == ScreenKind::risk && !s.risk_category) fail(path + ".risk_category", "required when kind is risk");
        s.scroll_loads_more = n["scroll_loads_more"] && n["scroll_loads_more"].as<bool>();
        if (const auto r = n["results"]) {
            if (r["top"]) s.results.top = integer(r["top"], path + ".results.top");
            if (r["item_height"]) s.results.item_height = integer(r["item_height"], path + ".results.item_height");
            if (r["margin"]) s.results.margin = integer(r["margin"], path + ".results.margin");
            if (s.results.item_height <= 2 * 20) fail(path + ".results.item_height", "must exceed 40");
        }
        if (const auto els = n["elements"]) {
            if (!els.IsSequence()) fail(path + ".elements", "must be a list");
            for (std::size_t i = 0; i < els.size(); ++i)
                s.elements.push_back(load_element(els[i], path + ".elements[" + std::to_string(i) + "]", s.canvas_height));
        }
        return s;
    }

    ElementModel load_element(const YAML::Node& n, const std::string& path, int canvas_height) {
        if (!n.IsMap()) fail(path, "must be a mapping");
        ElementModel e;
        e.element_id = n["id"] ? scalar(n["id"], path + ".id") : path;
        e.text = n["text"] ? scalar(n["text"], path + ".text") : "";
        if (n["kind"]) {
            const auto k = element_kind_from(scalar(n["kind"], path + ".kind"));
            if (!k) fail(path + ".kind", "unknown element kind");
            e.element_kind = *k;
        }
        const auto bb = n["bbox"];
        if (!bb || !bb.IsSequence() || bb.size() != 4) fail(path + ".bbox", "expected [left, top, right, bottom]");
        e.bbox = {integer(bb[0], path + ".bbox"), integer(bb[1], path + ".bbox"), integer(bb[2], path + ".bbox"),
                  integer(bb[3], path + ".bbox")};
        if (!e.bbox.well_formed()) fail(path + ".bbox", "left < right and top < bottom required");
        if (!e.bbox.inside({0, 0, device_.width, canvas_height})) fail(path + ".bbox", "outside the screen canvas");
        if (const auto t = n["on_tap"]) {
            TapTarget tt;
            if (t.IsScalar()) {
                tt.target = t.as<std::string>();
            } else if (t.IsMap()) {
                const auto action = scalar(t["action"], path + ".on_tap.action");
                if (action == "navigate") tt.action = TapTarget::Action::navigate;
                else if (action == "search") tt.action = TapTarget::Action::search;
                else if (action == "login") tt.action = TapTarget::Action::login;
                else if (action == "back") tt.action = TapTarget::Action::back;
                else fail(path + ".on_tap.action", "unknown tap action " + action);
                if (tt.action != TapTarget::Action::back) tt.target = scalar(t["target"], path + ".on_tap.target");
            } else {
                fail(path + ".on_tap", "expected a screen id or {action, target}");
            }
            e.on_tap = tt;
        }
        if (n["on_input"]) {
            e.on_input = scalar(n["on_input"], path + ".on_input");
            if (e.element_kind != ElementKind::input) fail(path + ".on_input", "only input elements bind fields");
        }
        return e;
    }

    ScriptedPolicy load_policy(LlmRole role, const YAML::Node& n, const std::string& path) {
        if (!n.IsMap()) fail(path, "must be a mapping");
        ScriptedPolicy p;
        p.role = role;
        if (!n["default"]) fail(path + ".default", "a default response is required");
        p.default_response = scalar(n["default"], path + ".default");
        if (const auto rules = n["rules"]) {
            if (!rules.IsSequence()) fail(path + ".rules", "must be a list");
            for (std::size_t i = 0; i < rules.size(); ++i) {
                const auto& r = rules[i];
                const std::string rpath = path + ".rules[" + std::to_string(i) + "]";
                PolicyRule rule;
                rule.contains = string_list(r["contains"], rpath + ".contains");
                rule.not_contains = string_list(r["not_contains"], rpath + ".not_contains");
                if (r["pattern"]) {
                    rule.pattern = scalar(r["pattern"], rpath + ".pattern");
                    try {
                        std::regex check(*rule.pattern);
                    } catch (const std::regex_error&) {
                        fail(rpath + ".pattern", "invalid regular expression");
                    }
                }
                rule.response = scalar(r["response"], rpath + ".response");
                p.rules.push_back(std::move(rule));
            }
        }
        return p;
    }

    std::vector<OperatorRule> load_operator(const YAML::Node& n, const std::string& path) {
        static const std::regex trigger_re(R"(^(pause:(risk|error|budget|user|any)|milestone:\d+|step:\d+)$)");
        if (!n.IsSequence()) fail(path, "must be a list");
        std::vector<OperatorRule> out;
        for (std::size_t i = 0; i < n.size(); ++i) {
            const auto& r = n[i];
            const std::string rpath = path + "[" + std::to_string(i) + "]";
            OperatorRule rule;
            rule.trigger = scalar(r["on"], rpath + ".on");
            if (!std::regex_match(rule.trigger, trigger_re)) fail(rpath + ".on", "unknown trigger " + rule.trigger);
            rule.repeat = r["repeat"] && r["repeat"].as<bool>();
            const auto steps = r["do"];
            if (!steps || !steps.IsSequence()) fail(rpath + ".do", "required list");
            for (std::size_t j = 0; j < steps.size(); ++j)
                rule.steps.push_back(load_step(steps[j], rpath + ".do[" + std::to_string(j) + "]"));
            out.push_back(std::move(rule));
        }
        return out;
    }

    OperatorStep load_step(const YAML::Node& n, const std::string& path) {
        OperatorStep st;
        if (n.IsScalar()) {
            const auto s = n.as<std::string>();
            if (s == "intervene") st.kind = OperatorCommandKind::intervene;
            else if (s == "resume") st.kind = OperatorCommandKind::resume;
            else if (s == "screenshot") st.kind = OperatorCommandKind::screenshot;
            else if (s == "terminate") st.kind = OperatorCommandKind::terminate;
            else fail(path, "unknown operator command " + s);
            return st;
        }
        if (!n.IsMap()) fail(path, "expected a command name or mapping");
        if (n["resume"]) {
            st.kind = OperatorCommandKind::resume;
            st.manual_steps = integer(n["resume"], path + ".resume");
            if (st.manual_steps < 0) fail(path + ".resume", "manual step count must be >= 0");
            return st;
        }
        if (!n["gesture"]) fail(path, "expected resume or gesture");
        st.kind = OperatorCommandKind::gesture;
        const auto kind = action_kind_from(scalar(n["gesture"], path + ".gesture"));
        if (!kind) fail(path + ".gesture", "unknown gesture");
        st.gesture.kind = *kind;
        if (n["text"]) st.target_text = scalar(n["text"], path + ".text");
        if (n["x"] && n["y"]) st.gesture.tap_point = Point{integer(n["x"], path + ".x"), integer(n["y"], path + ".y")};
        if (n["value"]) st.gesture.input_text = scalar(n["value"], path + ".value");
        if (n["app"]) st.gesture.app_name = scalar(n["app"], path + ".app");
        if (n["direction"]) {
            st.gesture.direction = direction_from(scalar(n["direction"], path + ".direction"));
            if (!st.gesture.direction) fail(path + ".direction", "unknown direction");
        }
        if ((st.gesture.kind == ActionKind::tap || st.gesture.kind == ActionKind::long_press) &&
            !st.target_text && !st.gesture.tap_point)
            fail(path, "tap gesture needs text or x/y");
        if (st.gesture.kind == ActionKind::input && (!st.gesture.input_text || !st.target_text))
            fail(path, "input gesture needs text (field label) and value");
        return st;
    }

    std::string file_;
    DeviceConfig device_;
};

}  // namespace

Scenario parse_scenario(const std::string& yaml_text, const std::string& source_name) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ScenarioError(source_name, "<syntax>", e.what());
    }
    try {
        return Loader(source_name).load(root);
    } catch (const YAML::Exception& e) {
        throw ScenarioError(source_name, "<structure>", e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError(path.string(), "<file>", "cannot open file");
    std::stringstream buf;
    buf << in.rdbuf();
    auto sc = parse_scenario(buf.str(), path.string());
    sc.source = path;
    return sc;
}

}  // namespace dr
