#include "droidretriever/llm.hpp"

#include <cstdlib>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "droidretriever/domain.hpp"
#include "droidretriever/errors.hpp"

namespace dr {

long long count_words(std::string_view text) {
    std::istringstream in{std::string(text)};
    long long n = 0;
    std::string w;
    while (in >> w) ++n;
    return n;
}

ScriptedBackend::ScriptedBackend(std::map<LlmRole, ScriptedPolicy> policies) : policies_(std::move(policies)) {}

LlmResponse ScriptedBackend::complete(const LlmRequest& request) {
    auto it = policies_.find(request.role);
    if (it == policies_.end())
        throw PreconditionError("no scripted policy for role " + std::string(to_string(request.role)));
    LlmResponse r;
    r.text = it->second.respond(request.user_prompt);
    r.prompt_tokens = count_words(request.system_prompt) + count_words(request.user_prompt);
    r.completion_tokens = count_words(r.text);
    return r;
}

namespace {

std::string env_or(const std::string& name, const std::string& fallback) {
    const char* v = std::getenv(name.c_str());
    return v && *v ? std::string(v) : fallback;
}

std::string upper(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

HttpBackendConfig http_config_from_env(LlmRole role) {
    const std::string prefix = "DR_LLM_" + upper(to_string(role)) + "_";
    HttpBackendConfig c;
    c.base_url = env_or(prefix + "BASE_URL", env_or("DR_LLM_BASE_URL", "http://localhost:8000/v1"));
    c.model = env_or(prefix + "MODEL", env_or("DR_LLM_MODEL", "qwen2.5-72b-instruct"));
    c.api_key = env_or(prefix + "API_KEY", env_or("DR_LLM_API_KEY", ""));
    return c;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {}

std::string HttpBackend::request_body(const HttpBackendConfig& config, const LlmRequest& request) {
    nlohmann::json body{
        {"model", config.model},
        {"temperature", config.temperature},
        {"messages",
         {{{"role", "system"}, {"content", request.system_prompt}}, {{"role", "user"}, {"content", request.user_prompt}}}},
    };
    if (request.budget) body["max_tokens"] = *request.budget;
    return body.dump();
}

LlmResponse HttpBackend::parse_response(const std::string& body) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed completion body: ") + e.what());
    }
    if (!j.contains("choices") || j["choices"].empty()) throw TransportError("completion without choices");
    LlmResponse r;
    r.text = j["choices"][0]["message"].value("content", "");
    if (j.contains("usage")) {
        r.prompt_tokens = j["usage"].value("prompt_tokens", 0LL);
        r.completion_tokens = j["usage"].value("completion_tokens", 0LL);
    }
    return r;
}

LlmResponse HttpBackend::complete(const LlmRequest& request) {
    // Split "scheme://host[:port]/path" into client origin and request path.
    const auto scheme_end = config_.base_url.find("://");
    const auto path_start = config_.base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string origin = config_.base_url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
    if (!path.empty() && path.back() == '/') path.pop_back();
    path += "/chat/completions";

    httplib::Client client(origin);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, request_body(config_, request), "application/json");
    if (!res) throw TransportError("llm transport failure: " + httplib::to_string(res.error()));
    if (res->status >= 500 || res->status == 429)
        throw TransportError("llm endpoint returned HTTP " + std::to_string(res->status));
    if (res->status >= 400) throw GatewayError("llm endpoint rejected request: HTTP " + std::to_string(res->status), 1, true);
    auto r = parse_response(res->body);
    r.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    return r;
}

LlmGateway::LlmGateway(RetryPolicy retry) : retry_(std::move(retry)) {
    if (!retry_.sleep) retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (retry_.max_attempts < 1) retry_.max_attempts = 1;
}

void LlmGateway::set_backend(LlmRole role, std::shared_ptr<LlmBackend> backend) { backends_[role] = std::move(backend); }

void LlmGateway::set_all(std::shared_ptr<LlmBackend> backend) {
    for (auto role : {LlmRole::decomposer, LlmRole::navigator, LlmRole::evaluator, LlmRole::reporter})
        backends_[role] = backend;
}

LlmResponse LlmGateway::complete(const LlmRequest& request) {
    if (trim(request.system_prompt).empty() || trim(request.user_prompt).empty())
        throw PreconditionError("llm request prompts must be non-empty");
    auto it = backends_.find(request.role);
    if (it == backends_.end() || !it->second)
        throw PreconditionError("no backend configured for role " + std::string(to_string(request.role)));

    auto backoff = retry_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            auto r = it->second->complete(request);
            auto& c = counters_[static_cast<std::size_t>(request.role)];
            c.prompt += r.prompt_tokens;
            c.completion += r.completion_tokens;
            c.calls += 1;
            return r;
        } catch (const TransportError& e) {
            if (attempt >= retry_.max_attempts)
                throw GatewayError(std::string(e.what()) + " (after " + std::to_string(attempt) + " attempts)", attempt,
                                   true);
            retry_.sleep(backoff);
            backoff *= 2;
        }
    }
}

TokenUsage LlmGateway::usage(LlmRole role) const {
    const auto& c = counters_[static_cast<std::size_t>(role)];
    return {c.prompt.load(), c.completion.load(), c.calls.load()};
}

TokenUsage LlmGateway::usage() const {
    TokenUsage total;
    for (auto role : {LlmRole::decomposer, LlmRole::navigator, LlmRole::evaluator, LlmRole::reporter}) {
        const auto u = usage(role);
        total.prompt_tokens += u.prompt_tokens;
        total.completion_tokens += u.completion_tokens;
        total.calls += u.calls;
    }
    return total;
}

}  // namespace dr
