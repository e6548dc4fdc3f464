#include "droidretriever/trace.hpp"

#include <array>
#include <set>

#include "droidretriever/errors.hpp"

namespace dr {

namespace {

constexpr std::array<std::string_view, 14> kKindNames{
    "decomposed",          "action_preview",   "action_executed", "screenshot",   "milestone",
    "pause",               "intervention_start", "intervention_marker", "intervention_end", "user_capture",
    "subtask_done",        "warning",          "report_ready",    "terminated",
};

}  // namespace

std::string_view to_string(TraceKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<TraceKind> trace_kind_from(std::string_view s) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i)
        if (kKindNames[i] == s) return static_cast<TraceKind>(i);
    return std::nullopt;
}

nlohmann::json to_json(const TraceEvent& e) {
    nlohmann::json j{{"seq", e.seq}, {"timestamp", e.timestamp}, {"kind", to_string(e.kind)}, {"payload", e.payload}};
    j["subtask_id"] = e.subtask_id ? nlohmann::json(*e.subtask_id) : nlohmann::json();
    return j;
}

TraceEvent trace_event_from_json(const nlohmann::json& j) {
    TraceEvent e;
    e.seq = j.at("seq").get<long long>();
    e.timestamp = j.at("timestamp").get<long long>();
    const auto kind = trace_kind_from(j.at("kind").get<std::string>());
    if (!kind) throw ParseError("trace", "unknown event kind " + j.at("kind").dump(), j.dump());
    e.kind = *kind;
    e.payload = j.value("payload", nlohmann::json::object());
    if (j.contains("subtask_id") && !j["subtask_id"].is_null()) e.subtask_id = j["subtask_id"].get<int>();
    return e;
}

TraceLog::TraceLog(const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    out_.emplace(file, std::ios::trunc);
    if (!*out_) throw Error("cannot open trace file " + file.string());
}

const TraceEvent& TraceLog::append(TraceKind kind, long long timestamp, nlohmann::json payload,
                                   std::optional<int> subtask_id) {
    std::lock_guard lock(mu_);
    TraceEvent e;
    e.seq = static_cast<long long>(events_.size()) + 1;
    e.timestamp = timestamp;
    e.kind = kind;
    e.payload = std::move(payload);
    e.subtask_id = subtask_id;
    if (out_) {
        *out_ << to_json(e).dump() << '\n';
        out_->flush();
    }
    events_.push_back(std::move(e));
    return events_.back();
}

std::vector<TraceEvent> TraceLog::since(long long seq) const {
    std::lock_guard lock(mu_);
    std::vector<TraceEvent> out;
    for (const auto& e : events_)
        if (e.seq > seq) out.push_back(e);
    return out;
}

std::size_t TraceLog::size() const {
    std::lock_guard lock(mu_);
    return events_.size();
}

std::vector<TraceEvent> read_trace(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot read trace " + file.string());
    std::vector<TraceEvent> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(trace_event_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError("trace", "line " + std::to_string(lineno) + ": " + ex.what(), line);
        }
    }
    return out;
}

std::vector<std::string> verify_trace(const std::vector<TraceEvent>& events) {
    std::vector<std::string> v;
    long long last_seq = 0;
    std::optional<nlohmann::json> open_preview;
    bool in_takeover = false;
    std::optional<std::string> pending_risk;     // fingerprint of an unresolved risk pause
    std::set<std::string> released;               // risk fingerprints resumed by the user

    for (const auto& e : events) {
        const auto at = " (seq " + std::to_string(e.seq) + ")";
        if (e.seq <= last_seq) v.push_back("seq not increasing" + at);
        last_seq = e.seq;
        switch (e.kind) {
            case TraceKind::action_preview:
                open_preview = e.payload;
                break;
            case TraceKind::action_executed: {
                if (!open_preview || *open_preview != e.payload) v.push_back("execute without matching preview" + at);
                open_preview.reset();
                if (in_takeover) v.push_back("agent action during takeover" + at);
                const auto& screen = e.payload.value("screen", nlohmann::json::object());
                if (screen.value("kind", "") == "risk") {
                    const auto fp = screen.value("fingerprint", "");
                    if (!released.count(fp)) v.push_back("action on risk screen before resume" + at);
                }
                break;
            }
            case TraceKind::pause:
                if (e.payload.value("reason", "") == "risk") pending_risk = e.payload.value("fingerprint", "");
                break;
            case TraceKind::intervention_start:
                if (in_takeover) v.push_back("nested intervention_start" + at);
                in_takeover = true;
                open_preview.reset();
                break;
            case TraceKind::intervention_end:
                if (!in_takeover) v.push_back("intervention_end without start" + at);
                in_takeover = false;
                if (pending_risk) released.insert(*pending_risk);
                pending_risk.reset();
                break;
            default:
                break;
        }
    }
    return v;
}

}  // namespace dr
