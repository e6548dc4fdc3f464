#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace dr {

enum class TraceKind {
    decomposed,
    action_preview,
    action_executed,
    screenshot,
    milestone,
    pause,
    intervention_start,
    intervention_marker,
    intervention_end,
    user_capture,
    subtask_done,
    warning,
    report_ready,
    terminated,
};

std::string_view to_string(TraceKind k);
std::optional<TraceKind> trace_kind_from(std::string_view s);

struct TraceEvent {
    long long seq = 0;
    long long timestamp = 0;  // run-clock milliseconds
    TraceKind kind = TraceKind::warning;
    nlohmann::json payload = nlohmann::json::object();
    std::optional<int> subtask_id;
};

nlohmann::json to_json(const TraceEvent& e);
TraceEvent trace_event_from_json(const nlohmann::json& j);

// Append-only, readable from other threads while the run loop writes. When a
// file is attached every event is flushed to it as one JSON line.
class TraceLog {
public:
    TraceLog() = default;
    explicit TraceLog(const std::filesystem::path& file);

    const TraceEvent& append(TraceKind kind, long long timestamp, nlohmann::json payload,
                             std::optional<int> subtask_id = std::nullopt);
    std::vector<TraceEvent> since(long long seq) const;
    std::vector<TraceEvent> all() const { return since(0); }
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::vector<TraceEvent> events_;
    std::optional<std::ofstream> out_;
};

std::vector<TraceEvent> read_trace(const std::filesystem::path& file);

// Checks the structural trace invariants: strictly increasing seq, every
// executed action preceded by an identical preview, no agent actions between
// intervention start and end, and no action on a risk screen unless its pause
// was followed by a resume. Returns one message per violation.
std::vector<std::string> verify_trace(const std::vector<TraceEvent>& events);

}  // namespace dr
