#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "droidretriever/errors.hpp"
#include "droidretriever/policy.hpp"

namespace dr {

struct LlmRequest {
    LlmRole role = LlmRole::navigator;
    std::string system_prompt;
    std::string user_prompt;
    std::optional<int> budget;  // max output tokens
};

struct LlmResponse {
    std::string text;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long latency_ms = 0;
};

// Thrown by backends for failures worth retrying (network, timeout, 5xx).
class TransportError : public Error {
public:
    using Error::Error;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual LlmResponse complete(const LlmRequest& request) = 0;
};

// Whitespace-delimited token count.
long long count_words(std::string_view text);

// Pure function of (role, user_prompt): first matching rule of the role's policy.
class ScriptedBackend final : public LlmBackend {
public:
    explicit ScriptedBackend(std::map<LlmRole, ScriptedPolicy> policies);
    LlmResponse complete(const LlmRequest& request) override;

private:
    std::map<LlmRole, ScriptedPolicy> policies_;
};

struct HttpBackendConfig {
    std::string base_url;  // e.g. https://api.example.com/v1
    std::string model;
    std::string api_key;
    double temperature = 0.0;
    std::chrono::seconds timeout{120};
};

// Reads DR_LLM_BASE_URL / DR_LLM_MODEL / DR_LLM_API_KEY, with per-role
// overrides such as DR_LLM_NAVIGATOR_MODEL.
HttpBackendConfig http_config_from_env(LlmRole role);

// Chat-completion over HTTP(S): POST {base_url}/chat/completions.
class HttpBackend final : public LlmBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    LlmResponse complete(const LlmRequest& request) override;

    // Request body / response parsing, exposed for tests.
    static std::string request_body(const HttpBackendConfig& config, const LlmRequest& request);
    static LlmResponse parse_response(const std::string& body);

private:
    HttpBackendConfig config_;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::function<void(std::chrono::milliseconds)> sleep;  // defaults to std::this_thread::sleep_for
};

struct TokenUsage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long calls = 0;
    long long total() const { return prompt_tokens + completion_tokens; }
};

// Routes each role to its backend, retries transport failures with exponential
// backoff, and meters token usage. Counters may be read from other threads.
class LlmGateway {
public:
    explicit LlmGateway(RetryPolicy retry = {});

    void set_backend(LlmRole role, std::shared_ptr<LlmBackend> backend);
    void set_all(std::shared_ptr<LlmBackend> backend);

    // Throws PreconditionError for empty prompts or a missing backend, and a
    // terminal GatewayError once retries are exhausted.
    LlmResponse complete(const LlmRequest& request);

    TokenUsage usage() const;
    TokenUsage usage(LlmRole role) const;

private:
    struct Counters {
        std::atomic<long long> prompt{0};
        std::atomic<long long> completion{0};
        std::atomic<long long> calls{0};
    };

    RetryPolicy retry_;
    std::map<LlmRole, std::shared_ptr<LlmBackend>> backends_;
    std::array<Counters, 4> counters_;
};

}  // namespace dr
