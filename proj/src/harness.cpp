#include "droidretriever/harness.hpp"

#include <glob.h>

#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "droidretriever/errors.hpp"

namespace dr {

std::string_view to_string(MatchRule r) {
    switch (r) {
        case MatchRule::exact: return "exact";
        case MatchRule::contains: return "contains";
        case MatchRule::fuzzy: return "fuzzy";
    }
    return "contains";
}

std::optional<MatchRule> match_rule_from(std::string_view s) {
    if (s == "exact") return MatchRule::exact;
    if (s == "contains") return MatchRule::contains;
    if (s == "fuzzy") return MatchRule::fuzzy;
    return std::nullopt;
}

namespace {

std::string strip_links(const std::string& s) {
    static const std::regex link(R"(\[src \d+\]\([^)]*\)(<sup>[^<]*</sup>)?)");
    static const std::regex raw_cite(R"(\[\d+\([^\n]*?\)\])");
    return std::regex_replace(std::regex_replace(s, link, ""), raw_cite, "");
}

bool is_delimiter_row(const std::string& line) {
    static const std::regex re(R"(^\s*\|?\s*:?-{3,}:?\s*(\|\s*:?-{3,}:?\s*)*\|?\s*$)");
    return std::regex_match(line, re);
}

std::vector<std::string> split_cells(std::string line) {
    line = trim(line);
    if (line.starts_with('|')) line.erase(0, 1);
    if (line.ends_with('|')) line.pop_back();
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, '|')) cells.push_back(trim(cell));
    return cells;
}

void add_sentences(const std::string& text, std::vector<std::string>& out) {
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        cur += text[i];
        const bool end = (text[i] == '.' || text[i] == '!' || text[i] == '?') &&
                         (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])));
        if (end) {
            if (!trim(cur).empty()) out.push_back(trim(cur));
            cur.clear();
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
}

bool matches(const std::string& statement, const ScoringPoint& p) {
    switch (p.match_rule) {
        case MatchRule::exact: return statement.find(p.expected_text) != std::string::npos;
        case MatchRule::contains:
            return normalize_text(statement).find(normalize_text(p.expected_text)) != std::string::npos;
        case MatchRule::fuzzy: {
            // Best window of the same word count as the expected text.
            std::vector<std::string> words;
            std::istringstream in(normalize_text(statement));
            for (std::string w; in >> w;) words.push_back(w);
            std::size_t n = 0;
            std::istringstream ex(normalize_text(p.expected_text));
            for (std::string w; ex >> w;) ++n;
            if (n == 0) return false;
            if (words.size() < n) return report::similarity(normalize_text(statement), p.expected_text) >= kCitationThreshold;
            for (std::size_t i = 0; i + n <= words.size(); ++i) {
                std::string window;
                for (std::size_t k = 0; k < n; ++k) window += (k ? " " : "") + words[i + k];
                if (report::similarity(window, p.expected_text) >= kCitationThreshold) return true;
            }
            return false;
        }
    }
    return false;
}

std::string parse_quoted(const std::string& s, std::size_t& pos, const std::string& where) {
    while (pos < s.size() && s[pos] == ' ') ++pos;
    if (pos >= s.size() || s[pos] != '"') throw Error(where + ": expected a quoted string");
    const auto end = s.find('"', pos + 1);
    if (end == std::string::npos) throw Error(where + ": unterminated quote");
    auto out = s.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    return out;
}

}  // namespace

std::vector<std::string> report_statements(const std::string& markdown) {
    std::vector<std::string> out;
    std::istringstream in(strip_links(markdown));
    std::string line;
    static const std::regex item(R"(^\s*(?:[-*+]|\d+[.)])\s+(.*)$)");
    bool in_table = false;
    while (std::getline(in, line)) {
        const auto t = trim(line);
        if (t.empty()) {
            in_table = false;
            continue;
        }
        if (t.starts_with('|')) {
            if (is_delimiter_row(t)) continue;
            if (!in_table) {
                in_table = true;  // header row
                continue;
            }
            for (const auto& c : split_cells(t))
                if (!c.empty()) out.push_back(c);
            continue;
        }
        in_table = false;
        if (t.starts_with('#')) continue;
        std::smatch m;
        if (std::regex_match(t, m, item)) {
            if (!trim(m[1].str()).empty()) out.push_back(trim(m[1].str()));
            continue;
        }
        add_sentences(t, out);
    }
    return out;
}

ScoreCard score_report(const ReportBundle& report, const std::vector<ScoringPoint>& points,
                       const std::vector<std::string>& distractors) {
    ScoreCard card;
    const auto statements = report_statements(report.markdown);
    card.statements = static_cast<int>(statements.size());
    int mentioned = 0, correct = 0;
    for (const auto& p : points) {
        PointHit hit{p.point_id, false, false, ""};
        for (const auto& s : statements) {
            if (!matches(s, p)) continue;
            const bool ok = !p.correct_text ||
                            normalize_text(s).find(normalize_text(*p.correct_text)) != std::string::npos;
            if (!hit.mentioned || (ok && !hit.correct)) {
                hit.mentioned = true;
                hit.correct = ok;
                hit.statement = s;
            }
            if (hit.correct) break;
        }
        mentioned += hit.mentioned;
        correct += hit.correct;
        card.hits.push_back(std::move(hit));
    }
    for (const auto& s : statements)
        for (const auto& d : distractors)
            if (normalize_text(s).find(normalize_text(d)) != std::string::npos) {
                ++card.distractor_statements;
                break;
            }
    card.coverage = points.empty() ? 1.0 : static_cast<double>(mentioned) / static_cast<double>(points.size());
    card.accuracy = mentioned == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(mentioned);
    card.redundancy = statements.empty() ? 0.0
                                         : static_cast<double>(card.distractor_statements) /
                                               static_cast<double>(statements.size());
    return card;
}

std::vector<TaskSpec> parse_tasks(const std::string& text, const std::filesystem::path& base_dir) {
    std::vector<TaskSpec> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto where = "tasks line " + std::to_string(lineno);
        const auto t = trim(line);
        if (t.empty() || t.starts_with('#')) continue;
        const bool indented = std::isspace(static_cast<unsigned char>(line[0]));
        if (!indented) {
            const auto sep = t.find("::");
            if (sep == std::string::npos) throw Error(where + ": expected '<scenario> :: <task>'");
            TaskSpec spec;
            spec.scenario_label = trim(t.substr(0, sep));
            spec.task = trim(t.substr(sep + 2));
            if (spec.scenario_label.empty() || spec.task.empty()) throw Error(where + ": empty scenario or task");
            const std::filesystem::path p(spec.scenario_label);
            spec.scenario = p.is_absolute() ? p : base_dir / p;
            out.push_back(std::move(spec));
            continue;
        }
        if (out.empty()) throw Error(where + ": detail line before any task");
        auto& spec = out.back();
        std::istringstream words(t);
        std::string keyword;
        words >> keyword;
        if (keyword == "point") {
            ScoringPoint p;
            std::string rule;
            words >> p.point_id >> rule;
            const auto r = match_rule_from(rule);
            if (p.point_id.empty() || !r) throw Error(where + ": expected 'point <id> exact|contains|fuzzy \"text\"'");
            p.match_rule = *r;
            std::size_t pos = t.find(rule, t.find(p.point_id) + p.point_id.size()) + rule.size();
            p.expected_text = parse_quoted(t, pos, where);
            if (p.expected_text.empty()) throw Error(where + ": expected_text must be non-empty");
            const auto rest = trim(t.substr(pos));
            if (rest.starts_with("correct")) {
                std::size_t cpos = t.find("correct", pos) + 7;
                p.correct_text = parse_quoted(t, cpos, where);
            } else if (!rest.empty()) {
                throw Error(where + ": unexpected text after point");
            }
            spec.points.push_back(std::move(p));
        } else if (keyword == "distractor") {
            std::size_t pos = t.find("distractor") + 10;
            spec.distractors.push_back(parse_quoted(t, pos, where));
        } else if (keyword == "browse_limit") {
            int n = 0;
            if (!(words >> n) || n < 1) throw Error(where + ": browse_limit must be a positive integer");
            spec.browse_limit = n;
        } else {
            throw Error(where + ": unknown keyword " + keyword);
        }
    }
    return out;
}

std::vector<TaskSpec> load_tasks(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot read tasks file " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_tasks(ss.str(), file.parent_path().empty() ? std::filesystem::path(".") : file.parent_path());
}

std::vector<BatchRow> batch_run(const std::string& scenario_glob, const std::filesystem::path& tasks_file,
                                const BatchOptions& options) {
    std::set<std::filesystem::path> selected;
    glob_t g{};
    if (::glob(scenario_glob.c_str(), 0, nullptr, &g) == 0)
        for (std::size_t i = 0; i < g.gl_pathc; ++i) selected.insert(std::filesystem::weakly_canonical(g.gl_pathv[i]));
    globfree(&g);

    std::vector<BatchRow> rows;
    if (selected.empty()) return rows;
    for (const auto& spec : load_tasks(tasks_file)) {
        if (!selected.count(std::filesystem::weakly_canonical(spec.scenario))) continue;
        BatchRow row;
        row.task = spec.task;
        row.scenario = spec.scenario_label;
        try {
            auto sc = std::make_shared<const Scenario>(load_scenario(spec.scenario));
            RunConfig cfg;
            cfg.out_dir = options.out_dir;
            cfg.browse_limit = spec.browse_limit;
            Orchestrator orch(sc, scripted_gateway(*sc), cfg);
            const auto result = orch.run(spec.task);
            row.steps = result.metrics.steps;
            row.tokens = result.metrics.tokens;
            row.time_ms = result.metrics.time_ms;
            row.interventions = result.metrics.interventions;
            if (result.report) row.score = score_report(*result.report, spec.points, spec.distractors);
            row.status = result.terminated_by_user ? "terminated" : (result.report ? "done" : "failed");
            if (result.error) row.error = *result.error;
        } catch (const std::exception& ex) {
            row.status = "failed";
            row.error = ex.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string to_csv(const std::vector<BatchRow>& rows) {
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    };
    auto ratio = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    std::string out = "task,scenario,status,steps,tokens,time_ms,coverage,accuracy,redundancy,interventions\n";
    for (const auto& r : rows)
        out += quote(r.task) + "," + quote(r.scenario) + "," + r.status + "," + std::to_string(r.steps) + "," +
               std::to_string(r.tokens) + "," + std::to_string(r.time_ms) + "," + ratio(r.score.coverage) + "," +
               ratio(r.score.accuracy) + "," + ratio(r.score.redundancy) + "," + std::to_string(r.interventions) +
               "\n";
    return out;
}

}  // namespace dr
