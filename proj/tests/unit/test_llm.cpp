#include "doctest.h"

#include <cstdlib>
#include <regex>

#include "httplib.h"

#include "support.hpp"
#include "droidretriever/errors.hpp"
#include "droidretriever/llm.hpp"

using namespace dr;

namespace {

ScriptedPolicy policy(LlmRole role, std::vector<PolicyRule> rules, std::string fallback) {
    ScriptedPolicy p;
    p.role = role;
    p.rules = std::move(rules);
    p.default_response = std::move(fallback);
    return p;
}

LlmRequest request(LlmRole role, std::string user) { return {role, "system text", std::move(user), std::nullopt}; }

class FlakyBackend : public LlmBackend {
public:
    explicit FlakyBackend(int failures) : failures_(failures) {}
    LlmResponse complete(const LlmRequest&) override {
        ++calls;
        if (calls <= failures_) throw TransportError("boom");
        return {"ok", 3, 1, 0};
    }
    int calls = 0;

private:
    int failures_;
};

class RecordingBackend : public LlmBackend {
public:
    explicit RecordingBackend(std::shared_ptr<LlmBackend> inner) : inner_(std::move(inner)) {}
    LlmResponse complete(const LlmRequest& r) override {
        requests.push_back(r);
        return inner_->complete(r);
    }
    std::vector<LlmRequest> requests;

private:
    std::shared_ptr<LlmBackend> inner_;
};

long long regex_words(const std::string& s) {
    static const std::regex word(R"(\S+)");
    return std::distance(std::sregex_iterator(s.begin(), s.end(), word), std::sregex_iterator());
}

}  // namespace

TEST_CASE("scripted policy rule matching") {
    const auto p = policy(LlmRole::decomposer,
                          {{{"Universal Studios"}, {}, std::nullopt, "plan A"},
                           {{"hotel"}, {"cheap"}, std::nullopt, "plan B"},
                           {{}, {}, std::string(R"(\d{3} yuan)"), "plan C"}},
                          "fallback");
    CHECK(p.respond("visit Universal Studios Japan") == "plan A");
    CHECK(p.respond("visit Universal Studios Japan") == "plan A");
    CHECK(p.respond("a hotel please") == "plan B");
    CHECK(p.respond("a cheap hotel") == "fallback");
    CHECK(p.respond("costs 120 yuan") == "plan C");
    CHECK(p.respond("nothing") == "fallback");
    CHECK(p.match("a hotel") == 1u);
    CHECK_FALSE(p.match("zzz"));
}

TEST_CASE("response templates expand against the embedded description") {
    const std::string prompt =
        "Current screen:\n[screen] results_list\n[1] text \"Hotels\" @ (330,170)\n"
        "[2] list_item \"Hilton Shanghai Hongqiao\" @ (540,470) (visited)\n"
        "[3] list_item \"Hilton Garden Inn Hongqiao\" @ (540,770)\n[4] input \"Search\" @ (430,180)\n";
    CHECK(expand_response_templates("${tap:\"Hotels\"}", prompt).find("[330, 170]") != std::string::npos);
    CHECK(expand_response_templates("${tap_first_unvisited:list_item}", prompt).find("[540, 770]") !=
          std::string::npos);
    const auto in = expand_response_templates("${input:\"Search\":\"abc\"}", prompt);
    const auto inj = nlohmann::json::parse(in);
    CHECK(inj["input_text"] == "abc");
    CHECK(inj["target_field"] == 4);
    CHECK(expand_response_templates("${tap:\"Missing\"}", prompt) == "{}");
    CHECK(expand_response_templates("plain", prompt) == "plain");
}

TEST_CASE("scripted backend counts words") {
    CHECK(count_words("") == 0);
    CHECK(count_words("  one two\tthree\nfour ") == 4);
    ScriptedBackend b({{LlmRole::navigator, policy(LlmRole::navigator, {}, "one two three")}});
    const auto r = b.complete(request(LlmRole::navigator, "a b"));
    CHECK(r.text == "one two three");
    CHECK(r.prompt_tokens == 4);
    CHECK(r.completion_tokens == 3);
    CHECK_THROWS_AS(b.complete(request(LlmRole::reporter, "x")), PreconditionError);
}

TEST_CASE("gateway preconditions") {
    LlmGateway gw;
    gw.set_all(std::make_shared<FlakyBackend>(0));
    CHECK_THROWS_AS(gw.complete(request(LlmRole::navigator, "")), PreconditionError);
    CHECK_THROWS_AS(gw.complete(request(LlmRole::navigator, "   ")), PreconditionError);
    LlmGateway empty;
    CHECK_THROWS_AS(empty.complete(request(LlmRole::navigator, "x")), PreconditionError);
}

TEST_CASE("gateway retries with exponential backoff, then fails terminally") {
    std::vector<long long> sleeps;
    RetryPolicy retry{3, std::chrono::milliseconds(100), [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); }};

    LlmGateway ok(retry);
    auto flaky = std::make_shared<FlakyBackend>(2);
    ok.set_all(flaky);
    CHECK(ok.complete(request(LlmRole::evaluator, "x")).text == "ok");
    CHECK(flaky->calls == 3);
    CHECK(sleeps == std::vector<long long>{100, 200});
    CHECK(ok.usage(LlmRole::evaluator).calls == 1);
    CHECK(ok.usage().total() == 4);

    sleeps.clear();
    LlmGateway bad(retry);
    bad.set_all(std::make_shared<FlakyBackend>(99));
    try {
        bad.complete(request(LlmRole::evaluator, "x"));
        FAIL("expected GatewayError");
    } catch (const GatewayError& e) {
        CHECK(e.attempts() == 3);
        CHECK(e.terminal());
    }
    CHECK(sleeps.size() == 2);
    CHECK(bad.usage().calls == 0);
}

TEST_CASE("http backend wire format") {
    HttpBackendConfig cfg{"http://x/v1", "m1", "k", 0.0};
    LlmRequest r{LlmRole::navigator, "sys", "user", 256};
    const auto body = nlohmann::json::parse(HttpBackend::request_body(cfg, r));
    CHECK(body["model"] == "m1");
    CHECK(body["max_tokens"] == 256);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "user");

    const auto parsed = HttpBackend::parse_response(
        R"({"choices":[{"message":{"content":"hi"}}],"usage":{"prompt_tokens":7,"completion_tokens":2}})");
    CHECK(parsed.text == "hi");
    CHECK(parsed.prompt_tokens == 7);
    CHECK(parsed.completion_tokens == 2);
    CHECK_THROWS_AS(HttpBackend::parse_response("not json"), TransportError);
    CHECK_THROWS_AS(HttpBackend::parse_response(R"({"choices":[]})"), TransportError);
}

TEST_CASE("http config reads role overrides from the environment") {
    ::setenv("DR_LLM_BASE_URL", "http://base/v1", 1);
    ::setenv("DR_LLM_MODEL", "general", 1);
    ::setenv("DR_LLM_REPORTER_MODEL", "writer", 1);
    CHECK(http_config_from_env(LlmRole::navigator).model == "general");
    CHECK(http_config_from_env(LlmRole::reporter).model == "writer");
    CHECK(http_config_from_env(LlmRole::reporter).base_url == "http://base/v1");
    ::unsetenv("DR_LLM_BASE_URL");
    ::unsetenv("DR_LLM_MODEL");
    ::unsetenv("DR_LLM_REPORTER_MODEL");
}

TEST_CASE("http backend against a local endpoint") {
    httplib::Server srv;
    int hits = 0;
    std::string auth;
    srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        auth = req.get_header_value("Authorization");
        if (hits == 1) {
            res.status = 503;
            return;
        }
        const auto j = nlohmann::json::parse(req.body);
        res.set_content(nlohmann::json{{"choices", {{{"message", {{"content", "echo " + j["model"].get<std::string>()}}}}}},
                                       {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 2}}}}
                            .dump(),
                        "application/json");
    });
    srv.Post("/bad/chat/completions", [](const httplib::Request&, httplib::Response& res) { res.status = 401; });
    const int port = srv.bind_to_any_port("127.0.0.1");
    std::thread t([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    const std::string base = "http://127.0.0.1:" + std::to_string(port);
    LlmGateway gw(RetryPolicy{3, std::chrono::milliseconds(1), [](auto) {}});
    gw.set_all(std::make_shared<HttpBackend>(HttpBackendConfig{base + "/v1", "tiny", "secret", 0.0}));
    const auto r = gw.complete(request(LlmRole::navigator, "hello"));
    CHECK(r.text == "echo tiny");
    CHECK(hits == 2);
    CHECK(auth == "Bearer secret");
    CHECK(gw.usage().prompt_tokens == 11);

    LlmGateway rejected;
    rejected.set_all(std::make_shared<HttpBackend>(HttpBackendConfig{base + "/bad", "tiny", "", 0.0}));
    try {
        rejected.complete(request(LlmRole::navigator, "hello"));
        FAIL("expected GatewayError");
    } catch (const GatewayError& e) {
        CHECK(e.attempts() == 1);
    }
    srv.stop();
    t.join();
}

TEST_CASE("run token total equals an independent recount of every call") {
    for (const auto* stem : {drt::kHotel.stem, drt::kShopping.stem, drt::kLogin.stem}) {
        CAPTURE(stem);
        const auto task = std::string(stem) == drt::kHotel.stem      ? drt::kHotel.task
                          : std::string(stem) == drt::kShopping.stem ? drt::kShopping.task
                                                                     : drt::kLogin.task;
        auto sc = drt::scenario(stem);
        auto recorder = std::make_shared<RecordingBackend>(std::make_shared<ScriptedBackend>(sc->policies));
        auto gw = std::make_shared<LlmGateway>();
        gw->set_all(recorder);
        Orchestrator orch(sc, gw, {});
        const auto result = orch.run(task);
        REQUIRE(result.report);
        long long expected = 0;
        for (const auto& req : recorder->requests) {
            const auto reply = sc->policies.at(req.role).respond(req.user_prompt);
            expected += regex_words(req.system_prompt) + regex_words(req.user_prompt) + regex_words(reply);
        }
        CHECK(result.metrics.tokens == expected);
        CHECK(gw->usage().total() == expected);
        CHECK(metrics_from_trace(result.trace).tokens == expected);
    }
}
