#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "droidretriever/action.hpp"
#include "droidretriever/domain.hpp"
#include "droidretriever/image.hpp"
#include "droidretriever/scenario.hpp"

namespace dr {

struct NavEntry {
    std::string app_id;
    std::string screen_id;
    int scroll_offset = 0;

    friend bool operator==(const NavEntry&, const NavEntry&) = default;
};

struct DeviceViewport {
    int width = 0;
    int height = 0;
    int scroll_offset = 0;
    std::optional<std::string> current_app;
    std::optional<std::string> current_screen;
    std::vector<NavEntry> nav_stack;

    friend bool operator==(const DeviceViewport&, const DeviceViewport&) = default;
};

// Pixel image of the visible viewport. Immutable once produced.
struct ScreenSnapshot {
    Image image;
    std::string snapshot_id;  // content hash
    int scroll_offset = 0;
};

// Element as known to the simulator, canvas coordinates, declaration order.
struct TruthElement {
    std::string text;
    ElementKind kind = ElementKind::text;
    Rect bbox;
};

struct ScreenTruth {
    std::string app_id;
    std::string screen_id;
    ScreenKind kind = ScreenKind::generic;
    std::optional<RiskCategory> risk_category;
    int canvas_height = 0;
    std::vector<TruthElement> elements;
};

// Driver contract shared by the simulator and real-device adapters.
class Device {
public:
    virtual ~Device() = default;

    virtual const DeviceViewport& viewport() const = 0;
    virtual void execute(const ActionCommand& action) = 0;
    virtual ScreenSnapshot render() const = 0;
    // Ground-truth screen content; only simulators can answer.
    virtual std::optional<ScreenTruth> truth() const { return std::nullopt; }
    // Installed apps as (app_id, display name).
    virtual std::vector<std::pair<std::string, std::string>> installed_apps() const = 0;
};

// Everything needed to put a simulator back into an exact state.
struct DeviceState {
    DeviceViewport viewport;
    std::map<std::string, std::string> queries;  // app_id -> submitted search query
    std::set<std::string> logged_in;
    std::map<std::string, std::string> fields;   // "app/screen/element" -> typed text
    std::optional<std::string> focused;

    friend bool operator==(const DeviceState&, const DeviceState&) = default;
};

nlohmann::json to_json(const DeviceState& s);
DeviceState device_state_from_json(const nlohmann::json& j);

class SimDevice final : public Device {
public:
    explicit SimDevice(std::shared_ptr<const Scenario> scenario);

    const DeviceViewport& viewport() const override { return vp_; }
    void execute(const ActionCommand& action) override;
    ScreenSnapshot render() const override;
    std::optional<ScreenTruth> truth() const override;
    std::vector<std::pair<std::string, std::string>> installed_apps() const override;

    // Rows [top, top + rows) of the current screen's full canvas.
    Image render_canvas(int top, int rows) const;
    Image render_full_canvas() const;
    int canvas_height() const;

    DeviceState state() const;
    void restore(const DeviceState& s);

    const Scenario& scenario() const { return *scenario_; }
    int default_scroll_delta() const { return (2 * vp_.height) / 3; }

private:
    const AppModel* current_app() const;
    const ScreenModel* current_screen() const;
    std::vector<ElementModel> current_elements() const;
    int max_scroll() const;
    void navigate(const std::string& screen_id);
    void tap(Point p);
    void open_app(const std::string& name);

    std::shared_ptr<const Scenario> scenario_;
    DeviceViewport vp_;
    std::map<std::string, std::string> queries_;
    std::set<std::string> logged_in_;
    std::map<std::string, std::string> fields_;  // "app/screen/element" -> value
    std::optional<std::string> focused_;         // element_id on the current screen
};

// Renders a canvas window for an arbitrary element list. Identical inputs give
// identical bytes, and any window equals the same rows of the full canvas.
Image render_elements(const std::vector<TruthElement>& elements, int width, int top, int rows);

}  // namespace dr
