#include "doctest.h"

#include <random>

#include "support.hpp"
#include "droidretriever/device.hpp"
#include "droidretriever/errors.hpp"

using namespace dr;

namespace {

std::shared_ptr<const Scenario> parse(const std::string& yaml) {
    return std::make_shared<const Scenario>(parse_scenario(yaml));
}

const char* kTapSample = R"(
name: tap-sample
apps:
  - app_id: a
    display_name: A
    home_screen: list
    screens:
      - screen_id: list
        kind: results_list
        elements:
          - {id: r, text: "Result", kind: list_item, bbox: [475, 1430, 595, 1550], on_tap: detail_1}
      - screen_id: detail_1
        kind: result_detail
        canvas_height: 4488
        elements:
          - {id: t, text: "Top", kind: text, bbox: [60, 100, 600, 200]}
          - {id: m, text: "Middle", kind: text, bbox: [60, 2300, 600, 2400]}
)";

}  // namespace

TEST_CASE("scenario loading") {
    SUBCASE("minimal scenario has one app") {
        const auto sc = parse_scenario(R"(
name: tiny
apps:
  - app_id: only
    home_screen: s
    screens:
      - {screen_id: s, kind: home}
)");
        CHECK(sc.apps.size() == 1);
        CHECK(sc.screen_count() == 1);
        CHECK(sc.device.width == 1080);
        CHECK(sc.device.height == 2244);
    }
    SUBCASE("broken transition names the missing screen") {
        try {
            parse_scenario(R"(
apps:
  - app_id: only
    home_screen: s
    screens:
      - screen_id: s
        kind: home
        elements:
          - {id: b, text: "Go", kind: button, bbox: [0, 0, 100, 100], on_tap: det_9}
)");
            FAIL("expected a ScenarioError");
        } catch (const ScenarioError& e) {
            CHECK(e.rule() == "broken transition: det_9");
            CHECK(e.field().find("on_tap") != std::string::npos);
        }
    }
    SUBCASE("two-app shopping corpus has 2 apps and 14 screens") {
        const auto sc = drt::scenario("shopping_multipage");
        CHECK(sc->apps.size() == 2);
        CHECK(sc->screen_count() == 14);
        REQUIRE(sc->find_app("shopb"));
        CHECK(sc->find_app("SHOPA")->app_id == "shopa");
        CHECK(sc->find_app("com.example.shopb")->display_name == "ShopB");
        CHECK_FALSE(sc->find_app("ShopC"));
    }
    SUBCASE("every shipped scenario loads") {
        for (const auto& e : std::filesystem::directory_iterator(drt::source_path("scenarios")))
            if (e.path().extension() == ".yaml") CHECK_NOTHROW(load_scenario(e.path()));
    }
    SUBCASE("validation errors") {
        const std::vector<std::pair<std::string, std::string>> bad{
            {"apps: 3", "apps"},
            {"apps: []\ndevice: {width: 0, height: 10}", "device"},
            {"apps:\n  - {app_id: a, home_screen: s, screens: []}", "screens"},
            {"apps:\n  - {app_id: a, home_screen: x, screens: [{screen_id: s, kind: home}]}", "home_screen"},
            {"apps:\n  - {app_id: a, home_screen: s, screens: [{screen_id: s, kind: nope}]}", "kind"},
            {"apps:\n  - {app_id: a, home_screen: s, screens: [{screen_id: s, kind: risk}]}", "risk_category"},
            {"apps:\n  - {app_id: a, home_screen: s, screens: [{screen_id: s, kind: home, canvas_height: 100}]}",
             "canvas_height"},
            {"apps:\n  - {app_id: a, home_screen: s, screens: [{screen_id: s, kind: home, elements: "
             "[{id: e, text: t, kind: text, bbox: [0, 0, 2000, 10]}]}]}",
             "bbox"},
            {"apps:\n  - {app_id: a, home_screen: s, screens: [{screen_id: s, kind: home, elements: "
             "[{id: e, text: t, kind: text, bbox: [5, 5, 5, 10]}]}]}",
             "bbox"},
            {"apps:\n  - {app_id: a, home_screen: s, requires_login: true, screens: [{screen_id: s, kind: home}]}",
             "requires_login"},
            {"apps:\n  - {app_id: a, home_screen: s, screens: [{screen_id: s, kind: home}]}\n"
             "  - {app_id: a, home_screen: s, screens: [{screen_id: s, kind: home}]}",
             "app_id"},
            {"apps: [{app_id: a, home_screen: s, screens: [{screen_id: s, kind: home}]}]\n"
             "policies: {oracle: {default: x}}",
             "policies"},
            {"apps: [{app_id: a, home_screen: s, screens: [{screen_id: s, kind: home}]}]\n"
             "policies: {navigator: {rules: []}}",
             "default"},
            {"apps: [{app_id: a, home_screen: s, screens: [{screen_id: s, kind: home}]}]\n"
             "policies: {operator: [{on: 'sometimes', do: [intervene]}]}",
             "on"},
            {"apps: [{app_id: a, home_screen: s, screens: [{screen_id: s, kind: home}]}\n", "<syntax>"},
        };
        for (const auto& [yaml, field] : bad) {
            CAPTURE(yaml);
            try {
                parse_scenario(yaml, "bad.yaml");
                FAIL("accepted an invalid scenario");
            } catch (const ScenarioError& e) {
                CHECK(e.file() == "bad.yaml");
                CHECK(e.field().find(field) != std::string::npos);
            }
        }
        CHECK_THROWS_AS(load_scenario("/nonexistent/x.yaml"), ScenarioError);
    }
}

TEST_CASE("execute follows the reference tap sample") {
    SimDevice dev(parse(kTapSample));
    dev.execute(ActionCommand::open_app("A"));
    dev.execute(ActionCommand::tap({535, 1490}));
    CHECK(dev.viewport().current_screen == "detail_1");
    CHECK(dev.viewport().nav_stack.size() == 1);
}

TEST_CASE("back at the root is a no-op") {
    SimDevice dev(parse(kTapSample));
    const auto before = dev.viewport();
    dev.execute(ActionCommand::back());
    CHECK(dev.viewport() == before);
    dev.execute(ActionCommand::open_app("A"));
    const auto at_root = dev.viewport();
    CHECK(at_root.nav_stack.empty());
    dev.execute(ActionCommand::back());
    CHECK(dev.viewport() == at_root);
}

TEST_CASE("scroll by two thirds on a double-height canvas") {
    SimDevice dev(parse(kTapSample));
    dev.execute(ActionCommand::open_app("A"));
    dev.execute(ActionCommand::tap({535, 1490}));
    dev.execute(ActionCommand::scroll(Direction::down));
    CHECK(dev.viewport().scroll_offset == (2 * 2244) / 3);
    dev.execute(ActionCommand::scroll(Direction::down));
    CHECK(dev.viewport().scroll_offset == 4488 - 2244);
    dev.execute(ActionCommand::scroll(Direction::up, 10000));
    CHECK(dev.viewport().scroll_offset == 0);
}

TEST_CASE("device errors") {
    SimDevice dev(parse(kTapSample));
    CHECK_THROWS_AS(dev.execute(ActionCommand::open_app("Nope")), DeviceError);
    dev.execute(ActionCommand::open_app("A"));
    CHECK_THROWS_AS(dev.execute(ActionCommand::tap({2000, 10})), DeviceError);
    CHECK_THROWS_AS(dev.execute(ActionCommand::tap({-1, 10})), DeviceError);
    CHECK_THROWS_AS(dev.execute(ActionCommand::input("x", Rect{0, 0, 10, 10})), DeviceError);
    CHECK_THROWS_AS(dev.execute(ActionCommand{.kind = ActionKind::tap}), DeviceError);
}

TEST_CASE("render is deterministic and clips to the window") {
    SimDevice dev(parse(kTapSample));
    dev.execute(ActionCommand::open_app("A"));
    dev.execute(ActionCommand::tap({535, 1490}));
    const auto a = dev.render();
    const auto b = dev.render();
    CHECK(a.image == b.image);
    CHECK(a.snapshot_id == b.snapshot_id);
    CHECK(a.image.width() == 1080);
    CHECK(a.image.height() == 2244);
    CHECK(a.image == dev.render_canvas(0, 2244));

    dev.execute(ActionCommand::scroll(Direction::down));
    const auto scrolled = dev.render();
    CHECK(scrolled.image == dev.render_full_canvas().crop_rows(1496, 2244));
    // "Top" sits entirely above the window; the rendered window must equal the
    // same window of a canvas that never contained it.
    const auto truth = dev.truth();
    REQUIRE(truth);
    std::vector<TruthElement> without_top;
    for (const auto& e : truth->elements)
        if (e.text != "Top") without_top.push_back(e);
    CHECK(render_elements(without_top, 1080, 1496, 2244) == scrolled.image);
    CHECK(render_elements(truth->elements, 1080, 0, 2244) != render_elements(without_top, 1080, 0, 2244));
}

TEST_CASE("render golden hash for a three-element screen") {
    const std::vector<TruthElement> els{
        {"Search hotels", ElementKind::button, {60, 200, 1020, 320}},
        {"Hilton Shanghai Hongqiao", ElementKind::list_item, {40, 340, 1040, 600}},
        {"CNY 1280 per night", ElementKind::text, {60, 700, 800, 800}},
    };
    const auto img = render_elements(els, 1080, 0, 2244);
    CHECK(drt::golden_diff("render/three_elements.hash", image_hash(img) + "\n") == "");
}

TEST_CASE("typed text and login state") {
    auto sc = drt::scenario("login_risk");
    SimDevice dev(sc);
    dev.execute(ActionCommand::open_app("Mall"));
    CHECK(dev.viewport().current_screen == "login");
    REQUIRE(dev.truth());
    CHECK(dev.truth()->kind == ScreenKind::risk);
    CHECK(dev.truth()->risk_category == RiskCategory::login_identity);

    dev.execute(ActionCommand::input("secret", Rect{60, 460, 1020, 580}));
    bool masked = false;
    for (const auto& e : dev.truth()->elements)
        if (e.kind == ElementKind::input && e.text == "******") masked = true;
    CHECK(masked);

    dev.execute(ActionCommand::tap({540, 700}));
    CHECK(dev.viewport().current_screen == "home");
    CHECK(dev.state().logged_in.count("mall") == 1);

    dev.execute(ActionCommand::back());
    dev.execute(ActionCommand::back());
    dev.execute(ActionCommand::open_app("Mall"));
    CHECK(dev.viewport().current_screen == "home");
}

TEST_CASE("search submits the query and lists the index entries") {
    SimDevice dev(drt::scenario("hotel_focused"));
    dev.execute(ActionCommand::open_app("Trip"));
    dev.execute(ActionCommand::tap({540, 360}));
    REQUIRE(dev.viewport().current_screen == "search");
    const auto truth = dev.truth();
    const TruthElement* box = nullptr;
    for (const auto& e : truth->elements)
        if (e.kind == ElementKind::input) box = &e;
    REQUIRE(box);
    dev.execute(ActionCommand::input("Hilton Shanghai Hongqiao", box->bbox));
    for (const auto& e : dev.truth()->elements)
        if (e.kind == ElementKind::button && e.text == "Go") dev.execute(ActionCommand::tap(e.bbox.center()));
    CHECK(dev.viewport().current_screen == "results");
    int items = 0;
    for (const auto& e : dev.truth()->elements) items += e.kind == ElementKind::list_item;
    CHECK(items == 2);
}

TEST_CASE("device state json round-trip and restore") {
    SimDevice dev(drt::scenario("hotel_focused"));
    dev.execute(ActionCommand::open_app("Trip"));
    dev.execute(ActionCommand::tap({540, 360}));
    const auto s = dev.state();
    CHECK(device_state_from_json(to_json(s)) == s);
    const auto img = dev.render().image;

    SimDevice other(drt::scenario("hotel_focused"));
    other.restore(s);
    CHECK(other.state() == s);
    CHECK(other.render().image == img);
}

TEST_CASE("property: random walks are deterministic, clamp scrolls, and back undoes taps") {
    auto sc = drt::scenario("shopping_multipage");
    for (int seed = 0; seed < 30; ++seed) {
        CAPTURE(seed);
        std::mt19937 rng(seed);
        SimDevice a(sc), b(sc);
        std::vector<ActionCommand> log;
        for (int step = 0; step < 40; ++step) {
            ActionCommand cmd;
            switch (rng() % 6) {
                case 0: cmd = ActionCommand::open_app(rng() % 2 ? "ShopA" : "ShopB"); break;
                case 1: cmd = ActionCommand::back(); break;
                case 2: cmd = ActionCommand::scroll(rng() % 2 ? Direction::down : Direction::up,
                                                    static_cast<int>(rng() % 3000)); break;
                case 3: cmd = ActionCommand::input("wireless earbuds", Rect{60, 200, 800, 320}); break;
                default: cmd = ActionCommand::tap({static_cast<int>(rng() % 1080), static_cast<int>(rng() % 2244)});
            }
            const auto before = a.viewport();
            try {
                a.execute(cmd);
            } catch (const DeviceError&) {
                CHECK(a.viewport() == before);
                continue;
            }
            b.execute(cmd);
            log.push_back(cmd);
            const int max_scroll = a.canvas_height() - a.viewport().height;
            CHECK(a.viewport().scroll_offset >= 0);
            CHECK(a.viewport().scroll_offset <= std::max(0, max_scroll));

            if (cmd.kind == ActionKind::tap && a.viewport().nav_stack.size() == before.nav_stack.size() + 1) {
                SimDevice probe(sc);
                probe.restore(a.state());
                probe.execute(ActionCommand::back());
                CHECK(probe.viewport().current_app == before.current_app);
                CHECK(probe.viewport().current_screen == before.current_screen);
                CHECK(probe.viewport().scroll_offset == before.scroll_offset);
            }
        }
        CHECK(a.state() == b.state());
        CHECK(a.render().image == b.render().image);
    }
}
