#include "droidretriever/policy.hpp"

#include <regex>
#include <sstream>

#include "droidretriever/domain.hpp"

namespace dr {

std::string_view to_string(LlmRole r) {
    switch (r) {
        case LlmRole::decomposer: return "decomposer";
        case LlmRole::navigator: return "navigator";
        case LlmRole::evaluator: return "evaluator";
        case LlmRole::reporter: return "reporter";
    }
    return "navigator";
}

std::optional<LlmRole> llm_role_from(std::string_view s) {
    const auto key = to_lower(trim(s));
    if (key == "decomposer") return LlmRole::decomposer;
    if (key == "navigator") return LlmRole::navigator;
    if (key == "evaluator") return LlmRole::evaluator;
    if (key == "reporter") return LlmRole::reporter;
    return std::nullopt;
}

bool ScriptedPolicy::rule_matches(const PolicyRule& rule, std::string_view user_prompt) const {
    for (const auto& s : rule.contains)
        if (user_prompt.find(s) == std::string_view::npos) return false;
    for (const auto& s : rule.not_contains)
        if (user_prompt.find(s) != std::string_view::npos) return false;
    if (rule.pattern) {
        const std::regex re(*rule.pattern, std::regex::ECMAScript | std::regex::multiline);
        if (!std::regex_search(user_prompt.begin(), user_prompt.end(), re)) return false;
    }
    return true;
}

std::optional<std::size_t> ScriptedPolicy::match(std::string_view user_prompt) const {
    for (std::size_t i = 0; i < rules.size(); ++i)
        if (rule_matches(rules[i], user_prompt)) return i;
    return std::nullopt;
}

std::string ScriptedPolicy::respond(std::string_view user_prompt) const {
    const auto idx = match(user_prompt);
    const std::string& text = idx ? rules[*idx].response : default_response;
    if (text.find("${") == std::string::npos) return text;
    return expand_response_templates(text, user_prompt);
}

namespace {

struct DescLine {
    int index;
    std::string kind;
    std::string text;
    int cx;
    int cy;
    bool visited;
};

// Element lines in the canonical description grammar: [i] kind "text" @ (cx,cy)[ (visited)]
std::vector<DescLine> description_lines(std::string_view prompt) {
    static const std::regex line_re(R"re(^\[(\d+)\] (\w+) "(.*)" @ \((-?\d+),(-?\d+)\)( \(visited\))?$)re");
    std::vector<DescLine> out;
    std::istringstream in{std::string(prompt)};
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (std::regex_match(line, m, line_re))
            out.push_back({std::stoi(m[1]), m[2], m[3], std::stoi(m[4]), std::stoi(m[5]), m[6].matched});
    }
    return out;
}

std::string tap_json(const DescLine& l) {
    std::ostringstream os;
    os << R"({"action": "tap", "tap_point": [)" << l.cx << ", " << l.cy << "]}";
    return os.str();
}

std::string expand_one(std::string_view body, const std::vector<DescLine>& lines) {
    static const std::regex tap_re(R"re(^tap:"(.*)"$)re");
    static const std::regex first_re(R"re(^tap_first_unvisited:(\w+)$)re");
    static const std::regex input_re(R"re(^input:"(.*)":"(.*)"$)re");
    const std::string b(body);
    std::smatch m;
    if (std::regex_match(b, m, tap_re)) {
        for (const auto& l : lines)
            if (l.text == m[1].str()) return tap_json(l);
    } else if (std::regex_match(b, m, first_re)) {
        for (const auto& l : lines)
            if (l.kind == m[1].str() && !l.visited) return tap_json(l);
    } else if (std::regex_match(b, m, input_re)) {
        for (const auto& l : lines) {
            if (l.text != m[1].str()) continue;
            nlohmann::json j{{"action", "input"}, {"input_text", m[2].str()}, {"target_field", l.index}};
            return j.dump();
        }
    }
    return "{}";
}

}  // namespace

std::string expand_response_templates(std::string_view response, std::string_view user_prompt) {
    const auto lines = description_lines(user_prompt);
    std::string out;
    std::size_t pos = 0;
    while (pos < response.size()) {
        const auto start = response.find("${", pos);
        if (start == std::string_view::npos) break;
        // Closing brace must sit outside the quoted arguments.
        std::size_t end = start + 2;
        bool quoted = false;
        for (; end < response.size(); ++end) {
            if (response[end] == '"') quoted = !quoted;
            else if (response[end] == '}' && !quoted) break;
        }
        if (end >= response.size()) break;
        out.append(response.substr(pos, start - pos));
        out += expand_one(response.substr(start + 2, end - start - 2), lines);
        pos = end + 1;
    }
    out.append(response.substr(pos));
    return out;
}

}  // namespace dr
