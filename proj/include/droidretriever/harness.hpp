#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "droidretriever/orchestrator.hpp"

namespace dr {

enum class MatchRule { exact, contains, fuzzy };
std::string_view to_string(MatchRule r);
std::optional<MatchRule> match_rule_from(std::string_view s);

struct ScoringPoint {
    std::string point_id;
    std::string expected_text;
    MatchRule match_rule = MatchRule::contains;
    // When set, the statement that mentions the point must also contain this
    // text for the point to count as correct.
    std::optional<std::string> correct_text;
};

struct PointHit {
    std::string point_id;
    bool mentioned = false;
    bool correct = false;
    std::string statement;
};

struct ScoreCard {
    double coverage = 0.0;
    double accuracy = 0.0;
    double redundancy = 0.0;
    std::vector<PointHit> hits;
    int statements = 0;
    int distractor_statements = 0;
};

// Statements: list items, table body cells, and sentences outside lists and
// tables. Headings and citation links are ignored.
std::vector<std::string> report_statements(const std::string& markdown);

ScoreCard score_report(const ReportBundle& report, const std::vector<ScoringPoint>& points,
                       const std::vector<std::string>& distractors);

struct TaskSpec {
    std::filesystem::path scenario;   // resolved against the tasks file directory
    std::string scenario_label;       // as written in the tasks file
    std::string task;
    std::vector<ScoringPoint> points;
    std::vector<std::string> distractors;
    std::optional<int> browse_limit;
};

// Format:
//   <scenario-path> :: <task text>
//     point <id> exact|contains|fuzzy "<text>" [correct "<text>"]
//     distractor "<text>"
//     browse_limit <n>
// Blank lines and lines starting with '#' are ignored.
std::vector<TaskSpec> parse_tasks(const std::string& text, const std::filesystem::path& base_dir = ".");
std::vector<TaskSpec> load_tasks(const std::filesystem::path& file);

struct BatchRow {
    std::string task;
    std::string scenario;
    std::string status;  // done | terminated | failed
    long long steps = 0;
    long long tokens = 0;
    long long time_ms = 0;
    ScoreCard score;
    int interventions = 0;
    std::string error;
};

struct BatchOptions {
    std::filesystem::path out_dir;  // empty: runs stay in memory
};

// Runs every task whose scenario matches `scenario_glob`. Failures become rows
// with status "failed"; the batch continues.
std::vector<BatchRow> batch_run(const std::string& scenario_glob, const std::filesystem::path& tasks_file,
                                const BatchOptions& options = {});

std::string to_csv(const std::vector<BatchRow>& rows);

}  // namespace dr
