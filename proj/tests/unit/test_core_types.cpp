#include "doctest.h"

#include <random>

#include "support.hpp"
#include "droidretriever/action.hpp"
#include "droidretriever/domain.hpp"
#include "droidretriever/image.hpp"

using namespace dr;

TEST_CASE("fnv1a64 matches the published test vectors") {
    CHECK(fnv1a64(std::string_view("")) == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64(std::string_view("a")) == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64(std::string_view("foobar")) == 0x85944171f73967e8ULL);
    CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("png encode and decode round-trip") {
    Image img(37, 23);
    std::mt19937 rng(7);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            img.set(x, y, {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
                           static_cast<std::uint8_t>(rng())});
    const auto bytes = encode_png(img);
    CHECK(decode_png(bytes) == img);

    const auto dir = drt::temp_dir("png");
    write_png(img, dir / "x.png");
    CHECK(read_png(dir / "x.png") == img);
    CHECK_THROWS_AS(decode_png(std::vector<std::uint8_t>{1, 2, 3}), Error);
}

TEST_CASE("crop and append rows") {
    Image img(4, 10);
    for (int y = 0; y < 10; ++y) img.fill_rect({0, y, 4, y + 1}, {static_cast<std::uint8_t>(y), 0, 0});
    const auto top = img.crop_rows(0, 6);
    auto joined = top;
    joined.append_rows(img.crop_rows(4, 6), 2);
    CHECK(joined == img);
    CHECK_THROWS(img.crop_rows(8, 5));
    Image other(5, 2);
    CHECK_THROWS(joined.append_rows(other));
}

TEST_CASE("image hash depends on size and pixels") {
    Image a(3, 3), b(3, 3), c(9, 1);
    CHECK(image_hash(a) == image_hash(b));
    b.set(1, 1, {0, 0, 0});
    CHECK(image_hash(a) != image_hash(b));
    CHECK(image_hash(a) != image_hash(c));
    CHECK(image_hash(a).size() == 16);
}

TEST_CASE("rect geometry") {
    Rect r{10, 20, 31, 41};
    CHECK(r.center() == Point{20, 30});
    CHECK(r.contains({10, 20}));
    CHECK_FALSE(r.contains({31, 20}));
    CHECK(r.intersect({0, 0, 15, 25}) == Rect{10, 20, 15, 25});
    CHECK_FALSE(r.intersects({31, 0, 40, 100}));
    CHECK(Rect{0, 0, 5, 5}.inside({0, 0, 5, 5}));
    CHECK_FALSE(Rect{3, 3, 3, 9}.well_formed());
}

TEST_CASE("text normalization") {
    CHECK(normalize_text("  Hello   World \t") == "hello world");
    CHECK(normalize_text("") == "");
    CHECK(trim("\n a b \n") == "a b");
}

TEST_CASE("enum spellings round-trip") {
    for (auto k : {ScreenKind::home, ScreenKind::search_entry, ScreenKind::results_list, ScreenKind::result_detail,
                   ScreenKind::generic, ScreenKind::risk})
        CHECK(screen_kind_from(to_string(k)) == k);
    for (auto k : {ElementKind::button, ElementKind::text, ElementKind::input, ElementKind::icon, ElementKind::list_item})
        CHECK(element_kind_from(to_string(k)) == k);
    for (int n = 1; n <= 7; ++n) {
        const auto c = risk_category_from_number(n);
        REQUIRE(c);
        CHECK(criterion_number(*c) == n);
        CHECK(risk_category_from(to_string(*c)) == c);
    }
    CHECK_FALSE(risk_category_from_number(0));
    CHECK_FALSE(risk_category_from_number(8));
}

TEST_CASE("search mode spellings") {
    CHECK(search_mode_from("Multi-page") == SearchMode::multi_page);
    CHECK(search_mode_from("multi_page") == SearchMode::multi_page);
    CHECK(search_mode_from("multipage") == SearchMode::multi_page);
    CHECK(search_mode_from("list") == SearchMode::list_view);
    CHECK(search_mode_from("List-View") == SearchMode::list_view);
    CHECK(search_mode_from("focused") == SearchMode::focused);
    CHECK_FALSE(search_mode_from("everything"));
    CHECK_FALSE(search_mode_from(""));
}

TEST_CASE("action validation") {
    CHECK(validate(ActionCommand::tap({5, 5})).empty());
    CHECK(validate(ActionCommand::back()).empty());
    CHECK(validate(ActionCommand::open_app("Trip")).empty());
    CHECK_FALSE(validate(ActionCommand::open_app("")).empty());
    CHECK_FALSE(validate(ActionCommand{.kind = ActionKind::tap}).empty());

    auto tap = ActionCommand::tap({50, 50});
    tap.element_bbox = Rect{0, 0, 10, 10};
    CHECK(validate(tap) == "tap_point outside element bbox");

    CHECK_FALSE(validate(ActionCommand{.kind = ActionKind::input, .input_text = "x"}).empty());
    CHECK(validate(ActionCommand::input("x", Rect{0, 0, 10, 10})).empty());
    CHECK_FALSE(validate(ActionCommand::scroll(Direction::left)).empty());
    CHECK_FALSE(validate(ActionCommand::scroll(Direction::down, -3)).empty());
    CHECK_FALSE(validate(ActionCommand{.kind = ActionKind::swipe, .direction = Direction::up}).empty());
}

TEST_CASE("action json round-trip") {
    std::vector<ActionCommand> cmds{
        ActionCommand::tap({535, 1490}),
        ActionCommand::back(),
        ActionCommand::open_app("ShopA"),
        ActionCommand::scroll(Direction::down, 1496),
        ActionCommand::input("Hilton", Rect{60, 200, 800, 320}),
        ActionCommand{.kind = ActionKind::swipe, .direction = Direction::left},
    };
    cmds[4].target_field = 2;
    for (const auto& c : cmds) CHECK(action_from_json(to_json(c)) == c);
    CHECK_THROWS_AS(action_from_json({{"action", "fly"}}), Error);
}
