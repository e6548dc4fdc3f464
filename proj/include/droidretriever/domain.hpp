#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace dr {

enum class ScreenKind { home, search_entry, results_list, result_detail, generic, risk };

enum class ElementKind { button, text, input, icon, list_item };

// The seven high-risk / privacy-sensitive screen classes the evaluator reports.
enum class RiskCategory {
    login_identity,
    payment,
    personal_info_edit,
    privacy_settings,
    account_deletion,
    agreement_authorization,
    sensitive_professional,
};

enum class SearchMode { focused, list_view, multi_page };

std::string_view to_string(ScreenKind k);
std::string_view to_string(ElementKind k);
std::string_view to_string(RiskCategory c);
std::string_view to_string(SearchMode m);

std::optional<ScreenKind> screen_kind_from(std::string_view s);
std::optional<ElementKind> element_kind_from(std::string_view s);
std::optional<RiskCategory> risk_category_from(std::string_view s);
// Accepts "multi-page", "Multi-page", "multipage", "multi_page", "list", "list-view", ...
std::optional<SearchMode> search_mode_from(std::string_view s);

// 1-based criterion number used in the evaluator prompt.
int criterion_number(RiskCategory c);
std::optional<RiskCategory> risk_category_from_number(int n);

// Lowercase (ASCII), trim, collapse internal whitespace runs to one space.
std::string normalize_text(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace dr
