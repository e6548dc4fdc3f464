#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "droidretriever/action.hpp"

namespace dr {

enum class LlmRole { decomposer, navigator, evaluator, reporter };

std::string_view to_string(LlmRole r);
std::optional<LlmRole> llm_role_from(std::string_view s);

// One matcher of a scripted policy. All `contains` substrings must occur in the
// user prompt, none of `not_contains` may, and `pattern` (ECMAScript regex) must
// find a match when present.
struct PolicyRule {
    std::vector<std::string> contains;
    std::vector<std::string> not_contains;
    std::optional<std::string> pattern;
    std::string response;
};

// Deterministic canned responses for one LLM role. First matching rule wins.
struct ScriptedPolicy {
    LlmRole role = LlmRole::navigator;
    std::vector<PolicyRule> rules;
    std::string default_response;

    bool rule_matches(const PolicyRule& rule, std::string_view user_prompt) const;
    // Index of the first matching rule, or nullopt for the default response.
    std::optional<std::size_t> match(std::string_view user_prompt) const;
    // Selected response with templates expanded against the prompt.
    std::string respond(std::string_view user_prompt) const;
};

// Expands response templates against the screen description embedded in a
// navigator prompt:
//   ${tap:"Text"}                 tap the centre of the element labelled Text
//   ${tap_first_unvisited:kind}   tap the first element of that kind not marked (visited)
//   ${input:"Field":"typed text"} type into the input element labelled Field
// Unresolvable templates expand to an empty object `{}`.
std::string expand_response_templates(std::string_view response, std::string_view user_prompt);

// Simulated human operator, used for headless runs and tests. A rule fires when
// its trigger matches an orchestrator event:
//   pause:risk | pause:error | pause:budget | pause:user | pause:any
//   milestone:N  (after the N-th milestone)    step:N (before agent action N executes)
enum class OperatorCommandKind { intervene, resume, screenshot, terminate, gesture };

struct OperatorStep {
    OperatorCommandKind kind = OperatorCommandKind::resume;
    int manual_steps = 0;                  // resume: user-reported manual step count
    ActionCommand gesture;                 // gesture: device action performed by the human
    std::optional<std::string> target_text;  // gesture: resolve tap/input target by element text
};

struct OperatorRule {
    std::string trigger;
    std::vector<OperatorStep> steps;
    bool repeat = false;
};

}  // namespace dr
