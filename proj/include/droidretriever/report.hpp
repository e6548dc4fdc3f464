#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "droidretriever/capture.hpp"
#include "droidretriever/llm.hpp"

namespace dr {

inline constexpr double kCitationThreshold = 0.8;

struct CitationMatch {
    int element_index = 0;
    Rect bbox;  // long-image coordinates
    double similarity = 0.0;

    friend bool operator==(const CitationMatch&, const CitationMatch&) = default;
};

struct Citation {
    int evidence_id = 0;
    std::string quoted_text;
    std::optional<CitationMatch> resolved;
    double best_similarity = 0.0;  // best score seen, even when below threshold

    friend bool operator==(const Citation&, const Citation&) = default;
};

enum class ReportFormat { narrative, tabular };
std::string_view to_string(ReportFormat f);

struct Highlight {
    int element_index = 0;
    Rect bbox;
    int citation = 0;  // position in ReportBundle::citations
};

struct ReportBundle {
    std::string task;
    std::string markdown;
    std::vector<Citation> citations;
    ReportFormat format = ReportFormat::narrative;
    int unresolved_count = 0;  // sub-threshold citations plus malformed ones
    std::vector<int> evidence_ids;  // records the report was built from
    std::map<int, std::vector<Highlight>> highlights;
};

nlohmann::json to_json(const ReportBundle& b);
nlohmann::json highlights_json(const ReportBundle& b, int evidence_id);

// One citation occurrence, or a bracketed group of them, in the raw markdown.
struct CitationSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // one past the closing bracket
    std::vector<std::size_t> citations;  // indices into ParsedCitations::citations
};

struct ParsedCitations {
    std::vector<Citation> citations;
    std::vector<CitationSpan> spans;
    int malformed = 0;
};

namespace report {

LlmRequest build_prompt(const std::string& task, const std::vector<std::shared_ptr<const EvidenceRecord>>& records);

// Total scanner for [x(quote)] citations and [[x(a)][y(b)]] groups.
ParsedCitations parse_citations(const std::string& markdown);

// 1 - levenshtein / max length, over normalized code points. Two empty strings score 1.
double similarity(std::string_view a, std::string_view b);

Citation ground_citation(Citation cit, const EvidenceRecord& record, double threshold = kCitationThreshold);

// Throws InvariantError naming the id when a citation points outside `records`.
ReportBundle assemble(const std::string& task, const std::vector<std::shared_ptr<const EvidenceRecord>>& records,
                      const std::string& raw_markdown, double threshold = kCitationThreshold);

ReportFormat classify(const std::string& markdown);

// Writes <run_dir>/report.md and <run_dir>/evidence/<id>.highlights.
void write_bundle(const ReportBundle& bundle, const std::filesystem::path& run_dir);

}  // namespace report
}  // namespace dr
