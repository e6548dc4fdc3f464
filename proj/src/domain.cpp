#include "droidretriever/domain.hpp"

#include <array>
#include <cctype>
#include <utility>

namespace dr {
namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<std::string_view, E>, N>& table, std::string_view s) {
    for (const auto& [name, value] : table)
        if (name == s) return value;
    return std::nullopt;
}

constexpr std::array<std::pair<std::string_view, ScreenKind>, 6> kScreenKinds{{
    {"home", ScreenKind::home},
    {"search_entry", ScreenKind::search_entry},
    {"results_list", ScreenKind::results_list},
    {"result_detail", ScreenKind::result_detail},
    {"generic", ScreenKind::generic},
    {"risk", ScreenKind::risk},
}};

constexpr std::array<std::pair<std::string_view, ElementKind>, 5> kElementKinds{{
    {"button", ElementKind::button},
    {"text", ElementKind::text},
    {"input", ElementKind::input},
    {"icon", ElementKind::icon},
    {"list_item", ElementKind::list_item},
}};

constexpr std::array<std::pair<std::string_view, RiskCategory>, 7> kRiskCategories{{
    {"login_identity", RiskCategory::login_identity},
    {"payment", RiskCategory::payment},
    {"personal_info_edit", RiskCategory::personal_info_edit},
    {"privacy_settings", RiskCategory::privacy_settings},
    {"account_deletion", RiskCategory::account_deletion},
    {"agreement_authorization", RiskCategory::agreement_authorization},
    {"sensitive_professional", RiskCategory::sensitive_professional},
}};

}  // namespace

std::string_view to_string(ScreenKind k) {
    for (const auto& [name, value] : kScreenKinds)
        if (value == k) return name;
    return "generic";
}

std::string_view to_string(ElementKind k) {
    for (const auto& [name, value] : kElementKinds)
        if (value == k) return name;
    return "text";
}

std::string_view to_string(RiskCategory c) {
    for (const auto& [name, value] : kRiskCategories)
        if (value == c) return name;
    return "login_identity";
}

std::string_view to_string(SearchMode m) {
    switch (m) {
        case SearchMode::focused: return "focused";
        case SearchMode::list_view: return "list_view";
        case SearchMode::multi_page: return "multi_page";
    }
    return "focused";
}

std::optional<ScreenKind> screen_kind_from(std::string_view s) { return lookup(kScreenKinds, s); }
std::optional<ElementKind> element_kind_from(std::string_view s) { return lookup(kElementKinds, s); }
std::optional<RiskCategory> risk_category_from(std::string_view s) { return lookup(kRiskCategories, s); }

std::optional<SearchMode> search_mode_from(std::string_view s) {
    std::string key;
    for (char c : to_lower(trim(s)))
        if (std::isalnum(static_cast<unsigned char>(c))) key += c;
    if (key == "multipage") return SearchMode::multi_page;
    if (key == "focused" || key == "focus") return SearchMode::focused;
    if (key == "listview" || key == "list") return SearchMode::list_view;
    return std::nullopt;
}

int criterion_number(RiskCategory c) { return static_cast<int>(c) + 1; }

std::optional<RiskCategory> risk_category_from_number(int n) {
    if (n < 1 || n > 7) return std::nullopt;
    return static_cast<RiskCategory>(n - 1);
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out)
        if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string normalize_text(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        const auto u = static_cast<unsigned char>(c);
        if (u < 0x80 && std::isspace(u)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += u < 0x80 ? static_cast<char>(std::tolower(u)) : c;
    }
    return out;
}

}  // namespace dr
