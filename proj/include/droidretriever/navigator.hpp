#pragma once

#include <optional>
#include <string>
#include <vector>

#include "droidretriever/action.hpp"
#include "droidretriever/decomposer.hpp"
#include "droidretriever/llm.hpp"
#include "droidretriever/perception.hpp"

namespace dr {

struct HistoryEntry {
    int step = 0;
    std::optional<ActionCommand> action;  // empty for an intervention marker
    std::string summary;                  // preview text or marker text
    std::string screen_id;
};

class ActionHistory {
public:
    // Throws InvariantError unless `entry.step` exceeds every previous step.
    void append(HistoryEntry entry);
    void add_action(const ActionCommand& cmd, std::string preview, std::string screen_id);
    void add_intervention(int manual_steps, std::string screen_id);

    const std::vector<HistoryEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }
    int next_step() const { return entries_.empty() ? 1 : entries_.back().step + 1; }

    // "none" or "step 1: Tap [Search]; step 2: ..."
    std::string render() const;

private:
    std::vector<HistoryEntry> entries_;
};

struct PreviewedAction {
    ActionCommand command;
    std::string preview;
    std::optional<Rect> highlight;  // canvas coordinates
    std::optional<int> element_index;
    std::string element_text;
};

namespace navigator {

inline constexpr int kStepBudget = 25;

struct ParsedAction {
    ActionCommand command;
    std::vector<std::string> warnings;
};

LlmRequest build_prompt(const SubTask& subtask, const ActionHistory& history, const UIDescription& description,
                        const std::optional<std::string>& help_doc = std::nullopt);

// Parses the JSON action block. Throws ParseError on malformed input or an
// unknown action. A tap point outside its element_location is moved to the
// box centre and reported as a warning.
ParsedAction parse_action(const std::string& response_text);

// Binds the command to a grounded element and produces the toast-style
// preview ("Tap [Texas]", "Enter [McDonald] in the [Search] field").
// Throws GroundingError for taps that hit nothing and carry no bbox.
PreviewedAction resolve_and_preview(const ActionCommand& cmd, const UIGrounding& grounding);

}  // namespace navigator
}  // namespace dr
