#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "droidretriever/capture.hpp"
#include "droidretriever/decomposer.hpp"
#include "droidretriever/evaluator.hpp"
#include "droidretriever/navigator.hpp"
#include "droidretriever/report.hpp"
#include "droidretriever/trace.hpp"

namespace dr {

enum class RunMode { auto_, paused_risk, paused_error, paused_user, manual_takeover, terminated, reporting, done };
std::string_view to_string(RunMode m);

struct ControlCommand {
    OperatorCommandKind kind = OperatorCommandKind::resume;
    int manual_steps = 0;
    ActionCommand gesture;
    std::optional<std::string> target_text;

    static ControlCommand from(const OperatorStep& s) { return {s.kind, s.manual_steps, s.gesture, s.target_text}; }
};

struct ControlReply {
    bool accepted = false;
    std::string message;
};

// Thread-safe command queue between the control surface and the run loop.
// submit() checks the command against the current mode and refuses it without
// queuing when that mode cannot accept it.
class ControlChannel {
public:
    ControlReply submit(const ControlCommand& cmd);
    std::optional<ControlCommand> try_pop();
    // Blocks until a command arrives or the channel is closed.
    std::optional<ControlCommand> wait_pop();
    void close();
    bool empty() const;

    void set_mode(RunMode m);
    RunMode mode() const;

    // Whether `kind` is legal in `mode`.
    static bool allowed(OperatorCommandKind kind, RunMode mode);

private:
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<ControlCommand> queue_;
    RunMode mode_ = RunMode::auto_;
    bool closed_ = false;
};

// Stand-in for the human at the phone. Called at every trigger point:
//   "pause:<reason>", "milestone:<n>", "step:<n>" (before agent action n executes).
class OperatorHook {
public:
    virtual ~OperatorHook() = default;
    virtual std::vector<OperatorStep> on_trigger(const std::string& trigger) = 0;
};

// Operator defined by a scenario's `policies.operator` block.
class ScriptedOperator final : public OperatorHook {
public:
    explicit ScriptedOperator(std::vector<OperatorRule> rules);
    std::vector<OperatorStep> on_trigger(const std::string& trigger) override;

private:
    std::vector<OperatorRule> rules_;
    std::vector<bool> fired_;
};

struct RunConfig {
    std::optional<int> browse_limit;
    StitchConfig stitch;
    double citation_threshold = kCitationThreshold;
    int step_budget = navigator::kStepBudget;
    // Run directory root; empty keeps everything in memory.
    std::filesystem::path out_dir;
    // When true a pause with no queued command blocks for the control surface;
    // otherwise the run terminates with a warning.
    bool interactive = false;
    // Logical clock increments, in milliseconds.
    long long action_ms = 800;
    long long llm_ms = 1000;
    long long capture_ms = 300;
};

struct SubTaskView {
    SubTask subtask;
    int pages_done = 0;
    int actions = 0;
};

struct RunSnapshot {
    std::string run_id;
    RunMode mode = RunMode::auto_;
    std::optional<std::string> pause_reason;
    int cursor = -1;  // index of the running subtask
    std::vector<SubTaskView> subtasks;
    long long steps = 0;
    long long clock_ms = 0;
    std::size_t evidence = 0;
    bool terminated_by_user = false;
    std::optional<std::string> error;
};

nlohmann::json to_json(const RunSnapshot& s);

struct RunMetrics {
    long long steps = 0;
    long long tokens = 0;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    long long time_ms = 0;  // run clock
    int interventions = 0;
    int intervention_steps = 0;
    bool task_intervened = false;
    double step_intervention_rate = 0.0;
    std::map<int, long long> steps_per_subtask;
};

nlohmann::json to_json(const RunMetrics& m);

// Metrics recomputed purely from a trace. Step-wise rate uses the combined
// denominator agent steps + user-reported manual steps.
RunMetrics metrics_from_trace(const std::vector<TraceEvent>& events);

struct RunResult {
    std::string run_id;
    std::optional<ReportBundle> report;
    RunMetrics metrics;
    RunMode final_mode = RunMode::done;
    bool terminated_by_user = false;
    std::optional<std::string> error;
    std::vector<TraceEvent> trace;
    std::filesystem::path run_dir;
    long long wall_ms = 0;
};

// Deterministic id: "run-" + first 8 hex digits of a hash of scenario name and task.
std::string make_run_id(const std::string& scenario_name, const std::string& task);

class Orchestrator {
public:
    // Simulator run over a loaded scenario.
    Orchestrator(std::shared_ptr<const Scenario> scenario, std::shared_ptr<LlmGateway> gateway, RunConfig config);
    // Any device; `label` stands in for the scenario name in the run id.
    Orchestrator(std::shared_ptr<Device> device, std::shared_ptr<LlmGateway> gateway, RunConfig config,
                 std::string label);
    ~Orchestrator();

    RunResult run(const std::string& task);

    ControlChannel& control() { return channel_; }
    void set_operator(std::shared_ptr<OperatorHook> op) { operator_ = std::move(op); }
    void set_perceiver(Perceiver* p) { perceiver_ = p; }

    // Safe to call from other threads while run() executes.
    RunSnapshot snapshot() const;
    std::shared_ptr<const TraceLog> trace() const;
    std::shared_ptr<const EvidenceStore> evidence() const;
    std::optional<ReportBundle> report() const;
    std::string run_id_for(const std::string& task) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    ControlChannel channel_;
    std::shared_ptr<OperatorHook> operator_;
    Perceiver* perceiver_ = nullptr;
};

std::shared_ptr<LlmGateway> scripted_gateway(const Scenario& scenario, RetryPolicy retry = {});

struct ReplayResult {
    DeviceState final_state;
    std::optional<DeviceState> recorded_state;
    int actions_replayed = 0;
    bool matches() const { return recorded_state && *recorded_state == final_state; }
};

// Re-executes a simulator trace against a fresh device built from the scenario
// path recorded in the `decomposed` event (or `scenario` when given).
ReplayResult replay(const std::vector<TraceEvent>& events,
                    std::optional<std::filesystem::path> scenario = std::nullopt);

}  // namespace dr
