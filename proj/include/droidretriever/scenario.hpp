#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "droidretriever/domain.hpp"
#include "droidretriever/geometry.hpp"
#include "droidretriever/policy.hpp"

namespace dr {

// What tapping an element does. `navigate` moves to `target`; `search` submits
// the app's query field and opens the results screen `target`; `login` marks the
// app as signed in and moves to `target`; `back` pops the navigation stack.
struct TapTarget {
    enum class Action { navigate, search, login, back };
    Action action = Action::navigate;
    std::string target;

    friend bool operator==(const TapTarget&, const TapTarget&) = default;
};

struct ElementModel {
    std::string element_id;
    std::string text;
    ElementKind element_kind = ElementKind::text;
    Rect bbox;  // canvas coordinates
    std::optional<TapTarget> on_tap;
    std::optional<std::string> on_input;  // field binding; "query" feeds the app search
};

// Placement of the search-index entries appended to a results_list screen.
struct ResultsLayout {
    int top = 320;
    int item_height = 300;
    int margin = 40;
};

struct ScreenModel {
    std::string screen_id;
    ScreenKind kind = ScreenKind::generic;
    int canvas_height = 0;
    std::vector<ElementModel> elements;
    std::optional<RiskCategory> risk_category;
    bool scroll_loads_more = false;
    ResultsLayout results;
};

struct ResultEntry {
    std::string title;
    std::string detail_screen;
};

struct AppModel {
    std::string app_id;
    std::string display_name;
    std::string package_name;
    std::string home_screen;
    std::map<std::string, ScreenModel> screens;
    // Keyed by normalized query text.
    std::map<std::string, std::vector<ResultEntry>> search_index;
    bool requires_login = false;
    std::string help_doc;

    const ScreenModel& screen(const std::string& id) const;
    // The login_identity risk screen shown before sign-in, when requires_login.
    const ScreenModel* login_screen() const;
};

struct DeviceConfig {
    int width = 1080;
    int height = 2244;
};

struct Scenario {
    std::string name;
    std::filesystem::path source;
    DeviceConfig device;
    std::vector<AppModel> apps;
    std::map<LlmRole, ScriptedPolicy> policies;
    std::vector<OperatorRule> operator_script;

    // Matches app_id, package name, or display name (case-insensitive).
    const AppModel* find_app(std::string_view name) const;
    std::size_t screen_count() const;
};

Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& yaml_text, const std::string& source_name = "<memory>");

}  // namespace dr
