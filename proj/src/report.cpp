#include "droidretriever/report.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "droidretriever/errors.hpp"

namespace dr {

std::string_view to_string(ReportFormat f) { return f == ReportFormat::tabular ? "tabular" : "narrative"; }

namespace {

nlohmann::json rect_json(const Rect& r) { return {r.left, r.top, r.right, r.bottom}; }

}  // namespace

nlohmann::json highlights_json(const ReportBundle& b, int evidence_id) {
    nlohmann::json rects = nlohmann::json::array();
    if (auto it = b.highlights.find(evidence_id); it != b.highlights.end())
        for (const auto& h : it->second)
            rects.push_back({{"element_index", h.element_index}, {"bbox", rect_json(h.bbox)}, {"citation", h.citation}});
    return {{"evidence_id", evidence_id}, {"rects", rects}};
}

nlohmann::json to_json(const ReportBundle& b) {
    nlohmann::json cits = nlohmann::json::array();
    for (const auto& c : b.citations) {
        nlohmann::json j{{"evidence_id", c.evidence_id},
                         {"quote", c.quoted_text},
                         {"best_similarity", c.best_similarity},
                         {"resolved", nullptr}};
        if (c.resolved)
            j["resolved"] = {{"element_index", c.resolved->element_index},
                             {"bbox", rect_json(c.resolved->bbox)},
                             {"similarity", c.resolved->similarity}};
        cits.push_back(std::move(j));
    }
    return {{"task", b.task},
            {"markdown", b.markdown},
            {"format", to_string(b.format)},
            {"unresolved_count", b.unresolved_count},
            {"evidence_ids", b.evidence_ids},
            {"citations", cits}};
}

namespace report {
namespace {

constexpr const char* kSystemPrompt =
    "Character Setting and Task:\n"
    "You are now a well-trained interface information extraction and integration robot, capable of strictly "
    "following my requirements to answer questions without accessing additional information online.\n"
    "You need to extract, summarize, or integrate content based on the text information from all interfaces I "
    "provide, and select and return different report formats according to different task types.\n"
    "\n"
    "The specific requirements are as follows:\n"
    "\n"
    "Citation Requirements\n"
    "- Each key point in the answer must be annotated with the source of the search results. The citation format "
    "is: [x(interface original content)].\n"
    "- Here, x is the interface id (not the line number), and \"interface original content\" refers to the specific "
    "element's original text on the interface referenced for the key point. If there are multiple citations, use "
    "multiple brackets, e.g., [[1(xxx)][2(yyy)]].\n"
    "- Provide citation sources for as many key points as possible.\n"
    "\n"
    "Task Types\n"
    "1. Article Summary: You need to combine one or more interfaces to summarize and provide a relatively reasonable "
    "summary of the article's key points. For example: However, some users expressed dissatisfaction with this "
    "song[3(not good)].\n"
    "2. Comparison Task: You need to combine one or more interfaces to provide a comparison from multiple "
    "perspectives in the form of a markdown table, based solely on the given information. For example, for the task "
    "\"Compare the performance of iPhone 14 and 14 Pro,\" you need to compare camera parameters, screen size, "
    "weight, etc. Note that all comparison information must be explicitly provided on the interface, e.g., price 120 "
    "yuan[1(120)], weight 450g[2(450g small capacity)].";

// Code points of the normalized string; invalid bytes count as one unit each.
std::vector<char32_t> code_points(std::string_view s) {
    const std::string n = normalize_text(s);
    std::vector<char32_t> out;
    for (std::size_t i = 0; i < n.size();) {
        const auto c = static_cast<unsigned char>(n[i]);
        int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
        if (i + static_cast<std::size_t>(len) > n.size()) len = 1;
        char32_t cp = len == 1 ? c : c & (0x3F >> (len - 1));
        for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(n[i + k]) & 0x3F);
        out.push_back(cp);
        i += static_cast<std::size_t>(len);
    }
    return out;
}

std::size_t levenshtein(const std::vector<char32_t>& a, const std::vector<char32_t>& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

struct Scanned {
    Citation citation;
    std::size_t end = 0;
};

// Parses one citation starting at `pos` ('['). Sets `malformed` when the text
// starts like a citation but never closes or quotes nothing.
std::optional<Scanned> scan_one(const std::string& s, std::size_t pos, bool& malformed) {
    malformed = false;
    if (pos >= s.size() || s[pos] != '[') return std::nullopt;
    std::size_t i = pos + 1;
    const std::size_t digits_from = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == digits_from || i - digits_from > 9 || i >= s.size() || s[i] != '(') return std::nullopt;
    const int id = std::stoi(s.substr(digits_from, i - digits_from));
    const std::size_t quote_from = ++i;
    const std::size_t line_end = std::min(s.find('\n', quote_from), s.size());

    std::optional<std::size_t> close;
    int depth = 1;
    for (std::size_t k = quote_from; k < line_end; ++k) {
        if (s[k] == '(') ++depth;
        else if (s[k] == ')') {
            if (depth == 1 && k + 1 < line_end && s[k + 1] == ']') {
                close = k;
                break;
            }
            depth = std::max(1, depth - 1);
        }
    }
    if (!close) {
        const auto first = s.find(")]", quote_from);
        if (first != std::string::npos && first < line_end) close = first;
    }
    if (!close || trim(s.substr(quote_from, *close - quote_from)).empty()) {
        malformed = true;
        return std::nullopt;
    }
    Scanned out;
    out.citation.evidence_id = id;
    out.citation.quoted_text = trim(s.substr(quote_from, *close - quote_from));
    out.end = *close + 2;
    return out;
}

}  // namespace

LlmRequest build_prompt(const std::string& task, const std::vector<std::shared_ptr<const EvidenceRecord>>& records) {
    if (records.empty()) throw PreconditionError("nothing to report");
    if (trim(task).empty()) throw PreconditionError("report needs a task");
    std::string info;
    for (const auto& r : records) {
        info += "interface id: " + std::to_string(r->evidence_id) + "\n" + r->description + "\n\n";
    }
    LlmRequest req;
    req.role = LlmRole::reporter;
    req.system_prompt = kSystemPrompt;
    req.user_prompt = "Task: The task I need to complete now is: " + task +
                      ". Please refer to the following multiple interfaces and answer in the required format.\n"
                      "Citations are mandatory:\n" +
                      info + "The output must be in markdown format. Citations are mandatory.";
    return req;
}

ParsedCitations parse_citations(const std::string& markdown) {
    ParsedCitations out;
    std::size_t i = 0;
    while (i < markdown.size()) {
        if (markdown[i] != '[') {
            ++i;
            continue;
        }
        bool malformed = false;
        // Group form: '[' followed by one or more citations and a closing ']'.
        if (i + 1 < markdown.size() && markdown[i + 1] == '[') {
            std::vector<Scanned> group;
            std::size_t j = i + 1;
            bool bad = false;
            while (true) {
                auto one = scan_one(markdown, j, bad);
                if (!one) break;
                j = one->end;
                group.push_back(std::move(*one));
            }
            if (!group.empty() && j < markdown.size() && markdown[j] == ']') {
                CitationSpan span{i, j + 1, {}};
                for (auto& g : group) {
                    span.citations.push_back(out.citations.size());
                    out.citations.push_back(std::move(g.citation));
                }
                out.spans.push_back(std::move(span));
                i = j + 1;
                continue;
            }
        }
        if (auto one = scan_one(markdown, i, malformed)) {
            out.spans.push_back({i, one->end, {out.citations.size()}});
            out.citations.push_back(std::move(one->citation));
            i = one->end;
            continue;
        }
        if (malformed) ++out.malformed;
        ++i;
    }
    return out;
}

double similarity(std::string_view a, std::string_view b) {
    const auto ca = code_points(a), cb = code_points(b);
    const std::size_t m = std::max(ca.size(), cb.size());
    if (m == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(ca, cb)) / static_cast<double>(m);
}

Citation ground_citation(Citation cit, const EvidenceRecord& record, double threshold) {
    if (cit.evidence_id != record.evidence_id)
        throw PreconditionError("citation id " + std::to_string(cit.evidence_id) + " does not match record " +
                                std::to_string(record.evidence_id));
    cit.resolved.reset();
    cit.best_similarity = 0.0;
    const UIElement* best = nullptr;
    for (const auto& e : record.grounding.elements) {
        const double s = similarity(cit.quoted_text, e.text);
        if (!best || s > cit.best_similarity || (s == cit.best_similarity && e.index < best->index)) {
            best = &e;
            cit.best_similarity = s;
        }
    }
    if (best && cit.best_similarity >= threshold) cit.resolved = CitationMatch{best->index, best->bbox, cit.best_similarity};
    return cit;
}

ReportFormat classify(const std::string& markdown) {
    static const std::regex delimiter(R"(^\s*\|?\s*:?-{3,}:?\s*(\|\s*:?-{3,}:?\s*)*\|?\s*$)");
    std::istringstream in(markdown);
    std::string line;
    while (std::getline(in, line))
        if (line.find('|') != std::string::npos && std::regex_match(line, delimiter)) return ReportFormat::tabular;
    return ReportFormat::narrative;
}

ReportBundle assemble(const std::string& task, const std::vector<std::shared_ptr<const EvidenceRecord>>& records,
                      const std::string& raw_markdown, double threshold) {
    std::map<int, const EvidenceRecord*> by_id;
    for (const auto& r : records) by_id[r->evidence_id] = r.get();

    auto parsed = parse_citations(raw_markdown);
    ReportBundle b;
    b.task = task;
    for (const auto& r : records) b.evidence_ids.push_back(r->evidence_id);
    b.format = classify(raw_markdown);
    b.unresolved_count = parsed.malformed;

    for (std::size_t k = 0; k < parsed.citations.size(); ++k) {
        auto& c = parsed.citations[k];
        const auto it = by_id.find(c.evidence_id);
        if (it == by_id.end())
            throw InvariantError("citation references evidence id " + std::to_string(c.evidence_id) +
                                 " which is not in the database");
        c = ground_citation(std::move(c), *it->second, threshold);
        if (c.resolved) {
            const Rect bounds{0, 0, it->second->long_image.width(), it->second->long_image.height()};
            if (!c.resolved->bbox.inside(bounds)) throw InvariantError("citation bbox outside evidence image");
            b.highlights[c.evidence_id].push_back({c.resolved->element_index, c.resolved->bbox, static_cast<int>(k)});
        } else {
            ++b.unresolved_count;
        }
    }

    auto link = [](const Citation& c) {
        const auto id = std::to_string(c.evidence_id);
        if (c.resolved)
            return "[src " + id + "](evidence/" + id + ".png#e" + std::to_string(c.resolved->element_index) + ")";
        return "[src " + id + "](evidence/" + id + ".png)<sup>\xE2\x80\xA0</sup>";
    };
    std::string md;
    std::size_t cursor = 0;
    for (const auto& span : parsed.spans) {
        md += raw_markdown.substr(cursor, span.begin - cursor);
        for (std::size_t n = 0; n < span.citations.size(); ++n) {
            if (n) md += " ";
            md += link(parsed.citations[span.citations[n]]);
        }
        cursor = span.end;
    }
    md += raw_markdown.substr(cursor);
    b.markdown = std::move(md);
    b.citations = std::move(parsed.citations);
    return b;
}

void write_bundle(const ReportBundle& bundle, const std::filesystem::path& run_dir) {
    std::filesystem::create_directories(run_dir / "evidence");
    std::ofstream(run_dir / "report.md") << bundle.markdown << (bundle.markdown.ends_with('\n') ? "" : "\n");
    for (int id : bundle.evidence_ids)
        std::ofstream(run_dir / "evidence" / (std::to_string(id) + ".highlights"))
            << highlights_json(bundle, id).dump(2) << "\n";
}

}  // namespace report
}  // namespace dr
