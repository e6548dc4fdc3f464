#include "droidretriever/evaluator.hpp"

#include <array>
#include <regex>

#include "droidretriever/errors.hpp"

namespace dr {

VisitOutcome RevisitTracker::note_visit(const std::string& fingerprint) {
    const int n = ++counts_[fingerprint];
    return n == 3 ? VisitOutcome::auto_scroll : VisitOutcome::proceed;
}

int RevisitTracker::count(const std::string& fingerprint) const {
    auto it = counts_.find(fingerprint);
    return it == counts_.end() ? 0 : it->second;
}

namespace evaluator {
namespace {

constexpr const char* kSystemPrompt =
    "You are a dual-role assistant. Based on the interface and actions, please judge both:\n"
    "(1) Whether the current app task is complete.\n"
    "(2) Whether the current screen belongs to a high-risk or privacy-sensitive interface requiring manual user "
    "takeover.\n"
    "\n"
    "Task Completion Criteria\n"
    "- For \"list\" mode: The task is considered complete once navigation to the search results page is achieved.\n"
    "- For \"focused\" mode and \"multi-page\" mode: The task is only considered complete when navigation to the "
    "details page of the search results is achieved.\n"
    "- Hotel Search Task: The screen must show specific room prices for one hotel. Listing multiple hotels doesn't "
    "count.\n"
    "- Shopping Task: Completion requires reaching the product page with options like \"Customer Service,\" "
    "\"Favorites,\" or \"Shopping Cart.\"\n"
    "- For tasks involving specific content, completion is only achieved when the action of clicking on the article "
    "title is performed.\n"
    "\n"
    "Risk / Privacy-Sensitive Screen Criteria\n"
    "1. Login/Registration/Identity verification (account, password, verification code, ID, face/fingerprint "
    "recognition).\n"
    "2. Payment/Transfer/Recharge/Withdrawal (payment password, bank card, code, biometric, order submission, "
    "purchase confirmation).\n"
    "3. Personal information editing (name, ID number, address, birthday, ID photo, etc.).\n"
    "4. System/App privacy settings (permissions such as location, contacts, camera, microphone; factory reset; "
    "delete all data; change security settings).\n"
    "5. Account deletion/data removal (cancel account, delete data, clear chat history, irreversible actions).\n"
    "6. Agreement/Authorization interface (consent to privacy policy, user agreement, third-party login "
    "authorization).\n"
    "7. Sensitive professional apps (medical, legal, government) involving uploading/filling sensitive "
    "information.\n"
    "Not high-risk: Viewing ordinary settings (Wi-Fi, Bluetooth, brightness, sound), normal browsing/searching, "
    "chat/mail view/edit, local photo/file browsing. If the task itself requires private info lookup, it does not "
    "count as high-risk.\n"
    "\n"
    "Output Format\n"
    "Completion<start>[True/False]<end>\n"
    "Reason<start>[Task completion reasoning]<end>\n"
    "Risk<start>[True/False]<end>\n"
    "Reason<start>[If True, specify which high-risk criteria; if False, explain why not]<end>";

std::string_view mode_name(SearchMode m) {
    switch (m) {
        case SearchMode::focused: return "focused";
        case SearchMode::list_view: return "list";
        case SearchMode::multi_page: return "multi-page";
    }
    return "focused";
}

[[noreturn]] void fail(const std::string& reason, const std::string& raw) { throw ParseError("verdict", reason, raw); }

std::optional<bool> parse_bool(const std::string& value) {
    std::string v;
    for (char c : to_lower(trim(value)))
        if (c != '[' && c != ']' && c != '"' && c != '\'' && c != '.') v += c;
    v = trim(v);
    if (v == "true" || v == "yes") return true;
    if (v == "false" || v == "no") return false;
    return std::nullopt;
}

}  // namespace

LlmRequest build_prompt(const SubTask& subtask, const ActionHistory& history, const UIDescription& description) {
    if (subtask.status != SubTaskStatus::running) throw PreconditionError("evaluator prompt needs a running subtask");
    LlmRequest req;
    req.role = LlmRole::evaluator;
    req.system_prompt = kSystemPrompt;
    req.user_prompt = "Current task: " + subtask.query_text + "\nSearch mode: " + std::string(mode_name(subtask.mode)) +
                      "\nFollowing actions have been performed: " + history.render() + "\nCurrent screen:\n" +
                      description.text;
    return req;
}

EvaluatorVerdict parse_verdict(const std::string& response_text) {
    // Tag<start>value<end>; the closing tag is sometimes written \end.
    static const std::regex tag_re(R"(([A-Za-z]+)\s*<start>([\s\S]*?)(?:<end>|\\end))", std::regex::icase);
    std::optional<bool> complete, risky;
    std::optional<std::string> completion_reason, risk_reason;
    enum class Last { none, completion, risk } last = Last::none;

    for (auto it = std::sregex_iterator(response_text.begin(), response_text.end(), tag_re);
         it != std::sregex_iterator(); ++it) {
        const auto tag = to_lower((*it)[1].str());
        const auto value = trim((*it)[2].str());
        if (tag == "completion") {
            if (complete) fail("duplicate Completion tag", response_text);
            complete = parse_bool(value);
            if (!complete) fail("Completion value is not True/False: \"" + value + "\"", response_text);
            last = Last::completion;
        } else if (tag == "risk") {
            if (risky) fail("duplicate Risk tag", response_text);
            risky = parse_bool(value);
            if (!risky) fail("Risk value is not True/False: \"" + value + "\"", response_text);
            last = Last::risk;
        } else if (tag == "reason") {
            std::string cleaned = value;
            if (cleaned.size() >= 2 && cleaned.front() == '[' && cleaned.back() == ']')
                cleaned = trim(cleaned.substr(1, cleaned.size() - 2));
            if (last == Last::completion && !completion_reason) completion_reason = cleaned;
            else if (last == Last::risk && !risk_reason) risk_reason = cleaned;
        }
    }
    if (!complete) fail("missing Completion tag", response_text);
    if (!risky) fail("missing Risk tag", response_text);

    EvaluatorVerdict v;
    v.complete = *complete;
    v.completion_reason = completion_reason.value_or("");
    v.risky = *risky;
    v.risk_reason = risk_reason.value_or("");
    if (v.risky) {
        if (trim(v.risk_reason).empty()) v.risk_reason = "unspecified high-risk screen";
        v.risk_category = infer_risk_category(v.risk_reason);
    }
    return v;
}

std::optional<RiskCategory> infer_risk_category(const std::string& reason) {
    static const std::regex number_re(R"((?:criteri(?:on|a)\s*(?:no\.?|#)?\s*\(?|\(|#)([1-7])\b)", std::regex::icase);
    static const std::regex leading_re(R"(^\s*\(?([1-7])[.)])");
    std::smatch m;
    if (std::regex_search(reason, m, number_re) || std::regex_search(reason, m, leading_re))
        return risk_category_from_number(std::stoi(m[1]));

    // Ordered: "payment password" must map to payment, not login.
    static const std::array<std::pair<RiskCategory, std::array<const char*, 8>>, 7> keywords{{
        {RiskCategory::payment,
         {"payment", "pay ", "bank card", "transfer", "recharge", "withdraw", "order submission", "purchase"}},
        {RiskCategory::account_deletion,
         {"account deletion", "delete account", "cancel account", "data removal", "delete data", "clear chat",
          "irreversible", "deactivate"}},
        {RiskCategory::privacy_settings,
         {"privacy setting", "permission", "factory reset", "security setting", "microphone", "camera access",
          "location access", "contacts access"}},
        {RiskCategory::agreement_authorization,
         {"agreement", "privacy policy", "consent", "authoriz", "authoris", "terms of service", "third-party login",
          "user agreement"}},
        {RiskCategory::personal_info_edit,
         {"personal information", "personal info", "id number", "birthday", "address", "id photo", "edit profile",
          "real name"}},
        {RiskCategory::sensitive_professional,
         {"medical", "legal", "government", "health record", "diagnos", "court", "tax", "prescription"}},
        {RiskCategory::login_identity,
         {"login", "log in", "sign in", "register", "password", "verification code", "identity", "fingerprint"}},
    }};
    const auto lower = to_lower(reason);
    for (const auto& [cat, words] : keywords)
        for (const char* w : words)
            if (lower.find(w) != std::string::npos) return cat;
    return std::nullopt;
}

std::string fingerprint(const std::optional<ScreenTruth>& truth, const DeviceViewport& vp,
                        const UIDescription& description) {
    if (truth) {
        const int unit = std::max(1, (2 * vp.height) / 3);
        const std::string key =
            truth->app_id + "|" + truth->screen_id + "|" + std::to_string(vp.scroll_offset / unit);
        return hex64(fnv1a64(key));
    }
    return hex64(fnv1a64(description.text));
}

}  // namespace evaluator
}  // namespace dr
