#include "droidretriever/decomposer.hpp"

#include <cctype>
#include <map>
#include <set>
#include <sstream>

#include "droidretriever/errors.hpp"

namespace dr {

std::string_view to_string(SubTaskStatus s) {
    switch (s) {
        case SubTaskStatus::pending: return "pending";
        case SubTaskStatus::running: return "running";
        case SubTaskStatus::done: return "done";
        case SubTaskStatus::failed: return "failed";
    }
    return "pending";
}

const CatalogApp* AppCatalog::find(std::string_view name) const {
    const auto key = normalize_text(name);
    if (key.empty()) return nullptr;
    for (const auto& a : apps)
        if (normalize_text(a.display_name) == key || normalize_text(a.app_id) == key ||
            (!a.package_name.empty() && normalize_text(a.package_name) == key))
            return &a;
    return nullptr;
}

LlmRequest with_reformat_instruction(LlmRequest request) {
    request.user_prompt +=
        "\n\nYour previous answer could not be parsed. Answer again using exactly the sample output format.";
    return request;
}

namespace decomposer {

namespace {

constexpr const char* kSystemPrompt =
    "Please answer the following questions:\n"
    "- Extract the app names explicitly mentioned in the task.\n"
    "- List apps that are installed and relevant to the task (up to 3).\n"
    "- List apps that are not installed but relevant to the task (up to 3).\n"
    "- If a query is needed, provide up to 3 search terms.\n"
    "- Select the query mode: multi-page, focused, or list-view.";

constexpr const char* kSampleOutput =
    "Sample output format:\n"
    "{\n"
    "    \"mentioned_apps\": [Expedia, Booking],\n"
    "    \"installed_related_apps\": [Expedia, Booking],\n"
    "    \"uninstalled_related_apps\": [none],\n"
    "    \"search terms\": ['Universal Studios Japan'],\n"
    "    \"search_mode\": ['Multi-page']\n"
    "}";

[[noreturn]] void fail(const std::string& reason, const std::string& raw) { throw ParseError("plan", reason, raw); }

// Key spellings seen in model output, folded to one canonical name.
std::string canonical_key(std::string_view raw) {
    std::string k;
    for (char c : to_lower(trim(raw))) k += (c == ' ' || c == '-') ? '_' : c;
    if (k == "search_terms" || k == "search_term" || k == "searchterms") return "search_terms";
    if (k == "search_mode" || k == "query_mode" || k == "mode" || k == "searchmode") return "search_mode";
    return k;
}

bool is_none(const std::string& item) {
    const auto k = to_lower(trim(item));
    return k.empty() || k == "none" || k == "null" || k == "n/a";
}

class PlanScanner {
public:
    PlanScanner(std::string_view body, const std::string& raw) : s_(body), raw_(raw) {}

    // key -> list of items; scalars become one-item lists.
    std::vector<std::pair<std::string, std::vector<std::string>>> entries() {
        std::vector<std::pair<std::string, std::vector<std::string>>> out;
        skip_separators();
        while (pos_ < s_.size()) {
            std::string key = read_key();
            skip_ws();
            if (pos_ >= s_.size() || s_[pos_] != ':') fail("expected ':' after key \"" + key + "\"", raw_);
            ++pos_;
            skip_ws();
            std::vector<std::string> items;
            if (pos_ < s_.size() && s_[pos_] == '[') items = read_list();
            else items.push_back(read_scalar());
            out.emplace_back(std::move(key), std::move(items));
            skip_separators();
        }
        return out;
    }

private:
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    void skip_separators() {
        while (pos_ < s_.size() && (std::isspace(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == ',')) ++pos_;
    }

    std::string read_quoted() {
        const char q = s_[pos_++];
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != q) {
            if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) ++pos_;
            out += s_[pos_++];
        }
        if (pos_ >= s_.size()) fail("unterminated quote", raw_);
        ++pos_;
        return out;
    }

    std::string read_key() {
        if (s_[pos_] == '"' || s_[pos_] == '\'') return read_quoted();
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != ':' && s_[pos_] != '\n') {
            if (s_[pos_] == '[' || s_[pos_] == ']' || s_[pos_] == '{' || s_[pos_] == '}')
                fail("unexpected bracket in key position", raw_);
            out += s_[pos_++];
        }
        if (trim(out).empty()) fail("empty key", raw_);
        return trim(out);
    }

    std::string read_scalar() {
        skip_ws();
        if (pos_ < s_.size() && (s_[pos_] == '"' || s_[pos_] == '\'')) return read_quoted();
        std::string out;
        while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != '\n' && s_[pos_] != ']') {
            if (s_[pos_] == '[' || s_[pos_] == '{' || s_[pos_] == '}') fail("unexpected bracket in value", raw_);
            out += s_[pos_++];
        }
        return trim(out);
    }

    std::vector<std::string> read_list() {
        ++pos_;  // '['
        std::vector<std::string> items;
        for (;;) {
            skip_ws();
            if (pos_ >= s_.size()) fail("unterminated list", raw_);
            if (s_[pos_] == ']') {
                ++pos_;
                return items;
            }
            if (s_[pos_] == ',') {
                ++pos_;
                continue;
            }
            if (s_[pos_] == '[') fail("nested list", raw_);
            std::string item;
            if (s_[pos_] == '"' || s_[pos_] == '\'') {
                item = read_quoted();
            } else {
                while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']') {
                    if (s_[pos_] == '\n' || s_[pos_] == '{' || s_[pos_] == '}' || s_[pos_] == '[')
                        fail("unterminated list", raw_);
                    item += s_[pos_++];
                }
                item = trim(item);
            }
            if (!is_none(item)) items.push_back(item);
        }
    }

    std::string_view s_;
    const std::string& raw_;
    std::size_t pos_ = 0;
};

// Returns the text between the outermost braces, honoring quotes.
std::string_view braced_body(const std::string& text) {
    const auto open = text.find('{');
    if (open == std::string::npos) fail("no '{' block found", text);
    int depth = 0;
    char quote = 0;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (quote) {
            if (c == '\\') ++i;
            else if (c == quote) quote = 0;
            continue;
        }
        // Apostrophes inside bare words ("Macy's") are not quotes.
        if (c == '"' || (c == '\'' && (i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1])))))
            quote = c;
        else if (c == '{') ++depth;
        else if (c == '}' && --depth == 0) return std::string_view(text).substr(open + 1, i - open - 1);
    }
    fail("unbalanced braces", text);
}

std::string quote_item(const std::string& item) {
    if (item.find('"') == std::string::npos) return "\"" + item + "\"";
    return "'" + item + "'";
}

std::string render_list(const std::vector<std::string>& items) {
    if (items.empty()) return "[none]";
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + quote_item(items[i]);
    return out + "]";
}

std::string_view mode_label(SearchMode m) {
    switch (m) {
        case SearchMode::focused: return "focused";
        case SearchMode::list_view: return "list-view";
        case SearchMode::multi_page: return "multi-page";
    }
    return "focused";
}

}  // namespace

LlmRequest build_prompt(const std::string& task, const AppCatalog& catalog) {
    if (trim(task).empty()) throw PreconditionError("task must be non-empty");
    if (catalog.apps.empty()) throw PreconditionError("no installed apps");
    std::string app_list;
    for (std::size_t i = 0; i < catalog.apps.size(); ++i) app_list += (i ? ", " : "") + catalog.apps[i].display_name;
    LlmRequest req;
    req.role = LlmRole::decomposer;
    req.system_prompt = kSystemPrompt;
    req.user_prompt = "The task requirement is " + task + ", and the following apps are installed: " + app_list +
                      ".\n\n" + kSampleOutput;
    return req;
}

ParsedPlan parse_plan(const std::string& response_text) {
    if (trim(response_text).empty()) fail("empty response", response_text);
    const auto body = braced_body(response_text);
    const auto entries = PlanScanner(body, response_text).entries();

    ParsedPlan out;
    std::set<std::string> seen;
    bool have_mode = false;
    bool recognized = false;
    for (const auto& [raw_key, items] : entries) {
        const auto key = canonical_key(raw_key);
        if (!seen.insert(key).second) fail("duplicate key \"" + raw_key + "\"", response_text);
        std::vector<std::string>* target = nullptr;
        if (key == "mentioned_apps") target = &out.plan.mentioned_apps;
        else if (key == "installed_related_apps") target = &out.plan.installed_related_apps;
        else if (key == "uninstalled_related_apps") target = &out.plan.uninstalled_related_apps;
        else if (key == "search_terms") target = &out.plan.search_terms;
        else if (key == "search_mode") {
            recognized = true;
            std::optional<SearchMode> mode;
            for (const auto& item : items) {
                if (is_none(item)) continue;
                const auto m = search_mode_from(item);
                if (!m) fail("unknown search mode \"" + item + "\"", response_text);
                if (mode && *mode != *m) fail("more than one search mode", response_text);
                mode = m;
            }
            if (!mode) fail("search_mode is empty", response_text);
            out.plan.search_mode = *mode;
            have_mode = true;
            continue;
        } else {
            out.warnings.push_back("ignored unknown key \"" + raw_key + "\"");
            continue;
        }
        recognized = true;
        for (const auto& item : items)
            if (!is_none(item)) target->push_back(item);
    }
    if (!recognized) fail("no recognized plan keys", response_text);
    if (!have_mode) fail("missing search_mode", response_text);

    auto cap = [&](std::vector<std::string>& list, const char* name) {
        if (list.size() <= static_cast<std::size_t>(kListCap)) return;
        out.warnings.push_back(std::string(name) + " truncated from " + std::to_string(list.size()) + " to 3");
        list.resize(kListCap);
    };
    cap(out.plan.installed_related_apps, "installed_related_apps");
    cap(out.plan.uninstalled_related_apps, "uninstalled_related_apps");
    cap(out.plan.search_terms, "search_terms");
    return out;
}

std::string render_plan(const DecompositionPlan& plan) {
    std::ostringstream os;
    os << "{\n"
       << "    \"mentioned_apps\": " << render_list(plan.mentioned_apps) << ",\n"
       << "    \"installed_related_apps\": " << render_list(plan.installed_related_apps) << ",\n"
       << "    \"uninstalled_related_apps\": " << render_list(plan.uninstalled_related_apps) << ",\n"
       << "    \"search_terms\": " << render_list(plan.search_terms) << ",\n"
       << "    \"search_mode\": ['" << mode_label(plan.search_mode) << "']\n"
       << "}";
    return os.str();
}

std::string rewrite_query(const std::string& app_name, const std::string& term) {
    return "Open " + app_name + ", search " + term + ", and tap into one search result";
}

Expansion expand(const DecompositionPlan& plan, const AppCatalog& catalog, const std::string& task,
                 std::optional<int> user_limit) {
    Expansion out;
    std::vector<const CatalogApp*> apps;
    auto add = [&](const std::string& name, const char* source) {
        const auto* app = catalog.find(name);
        if (!app) {
            out.warnings.push_back(std::string(source) + " app \"" + name + "\" is not installed; dropped");
            return;
        }
        for (const auto* a : apps)
            if (a == app) return;
        apps.push_back(app);
    };
    for (const auto& name : plan.mentioned_apps) add(name, "mentioned");
    for (const auto& name : plan.installed_related_apps) add(name, "related");
    if (apps.size() > static_cast<std::size_t>(kListCap)) {
        out.warnings.push_back("app list truncated from " + std::to_string(apps.size()) + " to 3");
        apps.resize(kListCap);
    }
    if (apps.empty()) throw Error("no executable apps");

    const int limit = user_limit.value_or(kDefaultBrowseLimit);
    if (limit < 1) throw PreconditionError("browse limit must be >= 1");
    int next_id = 1;
    for (const auto* app : apps) {
        if (plan.search_terms.empty()) {
            SubTask st;
            st.subtask_id = next_id++;
            st.app_id = app->app_id;
            st.app_name = app->display_name;
            st.mode = SearchMode::focused;
            st.query_text = task;
            out.subtasks.push_back(std::move(st));
            continue;
        }
        for (const auto& term : plan.search_terms) {
            SubTask st;
            st.subtask_id = next_id++;
            st.app_id = app->app_id;
            st.app_name = app->display_name;
            st.search_term = term;
            st.mode = plan.search_mode;
            st.query_text = rewrite_query(app->display_name, term);
            st.browse_limit = plan.search_mode == SearchMode::multi_page ? limit : 1;
            out.subtasks.push_back(std::move(st));
        }
    }
    return out;
}

}  // namespace decomposer
}  // namespace dr
