#pragma once

#include <map>
#include <optional>
#include <string>

#include "droidretriever/decomposer.hpp"
#include "droidretriever/device.hpp"
#include "droidretriever/llm.hpp"
#include "droidretriever/navigator.hpp"

namespace dr {

struct EvaluatorVerdict {
    bool complete = false;
    std::string completion_reason;
    bool risky = false;
    std::string risk_reason;
    std::optional<RiskCategory> risk_category;
};

enum class VisitOutcome { proceed, auto_scroll };

// Per-subtask arrival counts keyed by screen fingerprint.
class RevisitTracker {
public:
    // auto_scroll exactly when a fingerprint's count goes from 2 to 3.
    VisitOutcome note_visit(const std::string& fingerprint);
    int count(const std::string& fingerprint) const;
    void reset() { counts_.clear(); }

private:
    std::map<std::string, int> counts_;
};

namespace evaluator {

LlmRequest build_prompt(const SubTask& subtask, const ActionHistory& history, const UIDescription& description);

// Order-insensitive extraction of the Completion / Reason / Risk / Reason
// tags. Throws ParseError when Completion or Risk is missing or not a boolean.
EvaluatorVerdict parse_verdict(const std::string& response_text);

// Criterion number when stated ("criterion 2", "(2)"), else keyword mapping.
std::optional<RiskCategory> infer_risk_category(const std::string& reason);

// Simulation: (app, screen, scroll bucket). Real devices: description hash.
std::string fingerprint(const std::optional<ScreenTruth>& truth, const DeviceViewport& vp,
                        const UIDescription& description);

}  // namespace evaluator
}  // namespace dr
