#pragma once

#include <optional>
#include <string>
#include <vector>

#include "droidretriever/domain.hpp"
#include "droidretriever/llm.hpp"

namespace dr {

struct CatalogApp {
    std::string app_id;
    std::string display_name;
    std::string package_name;
};

struct AppCatalog {
    std::vector<CatalogApp> apps;

    const CatalogApp* find(std::string_view name) const;
};

struct DecompositionPlan {
    std::vector<std::string> mentioned_apps;
    std::vector<std::string> installed_related_apps;    // at most 3
    std::vector<std::string> uninstalled_related_apps;  // at most 3
    std::vector<std::string> search_terms;              // at most 3
    SearchMode search_mode = SearchMode::focused;

    friend bool operator==(const DecompositionPlan&, const DecompositionPlan&) = default;
};

enum class SubTaskStatus { pending, running, done, failed };
std::string_view to_string(SubTaskStatus s);

struct SubTask {
    int subtask_id = 0;
    std::string app_id;
    std::string app_name;
    std::optional<std::string> search_term;
    SearchMode mode = SearchMode::focused;
    std::string query_text;
    int browse_limit = 1;  // detail pages to collect; >= 1
    SubTaskStatus status = SubTaskStatus::pending;
};

namespace decomposer {

inline constexpr int kListCap = 3;
inline constexpr int kDefaultBrowseLimit = 3;

struct ParsedPlan {
    DecompositionPlan plan;
    std::vector<std::string> warnings;
};

struct Expansion {
    std::vector<SubTask> subtasks;
    std::vector<std::string> warnings;
};

LlmRequest build_prompt(const std::string& task, const AppCatalog& catalog);

// Tolerant parse of the bracketed plan block. Throws ParseError when no
// recognizable structure is present or the search mode is missing/ambiguous.
ParsedPlan parse_plan(const std::string& response_text);

// Canonical serialization; parse_plan(render_plan(p)).plan == p.
std::string render_plan(const DecompositionPlan& plan);

// Ordered SubTask queue: mentioned-and-installed apps first, then installed
// related apps, one SubTask per search term. Throws Error("no executable apps").
Expansion expand(const DecompositionPlan& plan, const AppCatalog& catalog, const std::string& task,
                 std::optional<int> user_limit = std::nullopt);

std::string rewrite_query(const std::string& app_name, const std::string& term);

}  // namespace decomposer

// Re-ask after an unparseable answer.
LlmRequest with_reformat_instruction(LlmRequest request);

}  // namespace dr
