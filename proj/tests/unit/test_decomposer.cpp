#include "doctest.h"

#include <random>

#include "corpora.hpp"
#include "support.hpp"
#include "droidretriever/decomposer.hpp"
#include "droidretriever/errors.hpp"

using namespace dr;

namespace {

AppCatalog catalog_of(const Scenario& sc) {
    AppCatalog c;
    for (const auto& a : sc.apps) c.apps.push_back({a.app_id, a.display_name, a.package_name});
    return c;
}

AppCatalog two_apps() { return {{{"expedia", "Expedia", "com.expedia"}, {"booking", "Booking", "com.booking"}}}; }

}  // namespace

TEST_CASE("prompt lists the installed apps and the five questions") {
    const auto req = decomposer::build_prompt("check hotels", two_apps());
    CHECK(req.role == LlmRole::decomposer);
    const auto all = req.system_prompt + req.user_prompt;
    CHECK(all.find("Expedia") != std::string::npos);
    CHECK(all.find("Booking") != std::string::npos);
    CHECK(all.find("check hotels") != std::string::npos);
    for (const char* q : {"mentioned", "installed", "not installed", "search terms", "query mode"}) {
        CAPTURE(q);
        CHECK(to_lower(all).find(q) != std::string::npos);
    }
    CHECK_THROWS_AS(decomposer::build_prompt("  ", two_apps()), PreconditionError);
    CHECK_THROWS_AS(decomposer::build_prompt("x", AppCatalog{}), PreconditionError);
}

TEST_CASE("golden hotel decomposer prompt") {
    const auto sc = drt::scenario("hotel_focused");
    const auto req = decomposer::build_prompt(drt::kHotel.task, catalog_of(*sc));
    CHECK(drt::golden_diff("prompts/decomposer_hotel.txt",
                           "SYSTEM\n" + req.system_prompt + "\nUSER\n" + req.user_prompt + "\n") == "");
}

TEST_CASE("reference sample plan") {
    const auto p = decomposer::parse_plan(drt::corpora::kPlanSample);
    CHECK(p.plan.mentioned_apps == std::vector<std::string>{"Expedia", "Booking"});
    CHECK(p.plan.installed_related_apps == std::vector<std::string>{"Expedia", "Booking"});
    CHECK(p.plan.uninstalled_related_apps.empty());
    CHECK(p.plan.search_terms == std::vector<std::string>{"Universal Studios Japan"});
    CHECK(p.plan.search_mode == SearchMode::multi_page);
}

TEST_CASE("plan parsing tolerances") {
    SUBCASE("surrounding prose and code fences") {
        const auto p = decomposer::parse_plan("Here you go:\n```json\n" + drt::corpora::kPlanSample + "\n```\nDone.");
        CHECK(p.plan.search_mode == SearchMode::multi_page);
    }
    SUBCASE("more than three search terms are capped with a warning") {
        const auto p = decomposer::parse_plan(
            R"({"mentioned_apps": [A], "search_terms": ['t1', 't2', 't3', 't4', 't5'], "search_mode": ['list']})");
        CHECK(p.plan.search_terms == std::vector<std::string>{"t1", "t2", "t3"});
        REQUIRE(p.warnings.size() == 1);
        CHECK(p.warnings[0].find("search_terms") != std::string::npos);
    }
    SUBCASE("apostrophes inside bare words") {
        const auto p = decomposer::parse_plan(R"({"mentioned_apps": [Macy's], "search_mode": ['focused']})");
        CHECK(p.plan.mentioned_apps == std::vector<std::string>{"Macy's"});
    }
    SUBCASE("unknown keys are ignored with a warning") {
        const auto p = decomposer::parse_plan(R"({"mood": [happy], "search_mode": ['focused']})");
        CHECK(p.warnings.size() == 1);
    }
}

TEST_CASE("malformed plans raise structured errors") {
    CHECK(drt::corpora::kMalformedPlans.size() >= 20);
    for (const auto& text : drt::corpora::kMalformedPlans) {
        CAPTURE(text);
        try {
            decomposer::parse_plan(text);
            FAIL("accepted");
        } catch (const ParseError& e) {
            CHECK(e.grammar() == "plan");
            CHECK_FALSE(e.reason().empty());
            CHECK(e.raw() == text);
        }
    }
}

TEST_CASE("property: render_plan round-trips") {
    std::mt19937 rng(3);
    const std::vector<std::string> words{"Trip", "Hilton", "Shop A", "caf\xc3\xa9", "Macy's", "say \"hi\"", "x,y", "a-b"};
    for (int round = 0; round < 300; ++round) {
        DecompositionPlan p;
        auto fill = [&](std::vector<std::string>& v, int cap) {
            const int n = static_cast<int>(rng() % (cap + 1));
            for (int i = 0; i < n; ++i) {
                auto w = words[rng() % words.size()];
                if (w == "x,y") w = "x y";  // commas are list separators
                v.push_back(w + std::to_string(i));
            }
        };
        fill(p.mentioned_apps, 3);
        fill(p.installed_related_apps, 3);
        fill(p.uninstalled_related_apps, 3);
        fill(p.search_terms, 3);
        p.search_mode = static_cast<SearchMode>(rng() % 3);
        const auto text = decomposer::render_plan(p);
        CAPTURE(text);
        CHECK(decomposer::parse_plan(text).plan == p);
    }
}

TEST_CASE("expansion order and query rewriting") {
    DecompositionPlan plan;
    plan.mentioned_apps = {"Expedia", "Booking"};
    plan.search_terms = {"t1", "t2"};
    plan.search_mode = SearchMode::multi_page;
    const auto ex = decomposer::expand(plan, two_apps(), "task");
    REQUIRE(ex.subtasks.size() == 4);
    const std::vector<std::pair<std::string, std::string>> order{
        {"expedia", "t1"}, {"expedia", "t2"}, {"booking", "t1"}, {"booking", "t2"}};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(ex.subtasks[i].subtask_id == static_cast<int>(i) + 1);
        CHECK(ex.subtasks[i].app_id == order[i].first);
        CHECK(ex.subtasks[i].search_term == order[i].second);
        CHECK(ex.subtasks[i].browse_limit == 3);
        CHECK(ex.subtasks[i].status == SubTaskStatus::pending);
    }
    CHECK(decomposer::expand(plan, two_apps(), "task", 5).subtasks[0].browse_limit == 5);
    CHECK_THROWS_AS(decomposer::expand(plan, two_apps(), "task", 0), PreconditionError);
}

TEST_CASE("no search terms keeps the original query") {
    DecompositionPlan plan;
    plan.mentioned_apps = {"Expedia"};
    plan.search_mode = SearchMode::multi_page;
    const auto ex = decomposer::expand(plan, two_apps(), "check hotels near the park");
    REQUIRE(ex.subtasks.size() == 1);
    CHECK(ex.subtasks[0].query_text == "check hotels near the park");
    CHECK(ex.subtasks[0].mode == SearchMode::focused);
    CHECK_FALSE(ex.subtasks[0].search_term);
}

TEST_CASE("uninstalled apps are dropped and an empty queue fails") {
    DecompositionPlan plan;
    plan.mentioned_apps = {"Agoda", "Booking"};
    plan.installed_related_apps = {"Booking", "Expedia"};
    plan.uninstalled_related_apps = {"Trivago"};
    const auto ex = decomposer::expand(plan, two_apps(), "t");
    REQUIRE(ex.subtasks.size() == 2);
    CHECK(ex.subtasks[0].app_id == "booking");
    CHECK(ex.subtasks[1].app_id == "expedia");
    CHECK(ex.warnings.size() == 1);

    DecompositionPlan none;
    none.mentioned_apps = {"Agoda"};
    CHECK_THROWS_WITH_AS(decomposer::expand(none, two_apps(), "t"), "no executable apps", Error);
}

TEST_CASE("hotel expansion equals the hand-derived queue") {
    const auto sc = drt::scenario("hotel_focused");
    const auto plan = decomposer::parse_plan(sc->policies.at(LlmRole::decomposer).default_response).plan;
    const auto ex = decomposer::expand(plan, catalog_of(*sc), drt::kHotel.task);
    REQUIRE(ex.subtasks.size() == 1);
    const auto& st = ex.subtasks[0];
    CHECK(st.subtask_id == 1);
    CHECK(st.app_id == "trip");
    CHECK(st.app_name == "Trip");
    CHECK(st.search_term == "Hilton Shanghai Hongqiao");
    CHECK(st.mode == SearchMode::focused);
    CHECK(st.query_text == "Open Trip, search Hilton Shanghai Hongqiao, and tap into one search result");
    CHECK(st.browse_limit == 1);
    CHECK(ex.warnings.empty());
}

TEST_CASE("reformat instruction is appended") {
    const auto req = decomposer::build_prompt("t", two_apps());
    const auto again = with_reformat_instruction(req);
    CHECK(again.user_prompt.size() > req.user_prompt.size());
    CHECK(again.user_prompt.starts_with(req.user_prompt));
    CHECK(again.system_prompt == req.system_prompt);
}
