#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "droidretriever/device.hpp"
#include "droidretriever/perception.hpp"

namespace dr {

struct StitchConfig {
    int scroll_count = 4;
    double scroll_fraction = 2.0 / 3.0;
    int template_strip_height = 120;
    // Mean absolute difference per channel sample, on the 0-255 scale.
    double match_tolerance = 0.0;

    static StitchConfig real_capture() { return {4, 2.0 / 3.0, 120, 8.0}; }
};

struct OverlapMatch {
    int row = 0;          // row in the later image where the earlier image's bottom strip starts
    int strip_height = 0;
    double mad = 0.0;
    bool within_tolerance = false;

    // Rows of the later image already present in the earlier one.
    int overlap_rows() const { return row + strip_height; }
};

// Finds where the bottom `strip_height` rows of `earlier` best match inside
// `later` (minimal mean absolute difference). Ties go to the row closest to
// `expected_row` when given, else the lowest row.
OverlapMatch locate_overlap(const Image& earlier, const Image& later, int strip_height, double tolerance,
                            std::optional<int> expected_row = std::nullopt);

struct StitchResult {
    Image image;
    // For capture k: first row of capture k that was appended, and where it landed.
    std::vector<int> first_new_row;
    std::vector<int> long_row;
    bool fallback = false;  // some pair had no match within tolerance and was concatenated
};

// Throws PreconditionError for an empty list or mismatched widths.
StitchResult stitch(const std::vector<Image>& captures, const StitchConfig& config,
                    const std::vector<std::optional<int>>& expected_rows = {});

enum class EvidenceOrigin { system, user };
std::string_view to_string(EvidenceOrigin o);

struct EvidenceRecord {
    int evidence_id = 0;
    int subtask_id = 0;  // 0 when captured outside any subtask
    Image long_image;
    UIGrounding grounding;  // long-image coordinates
    std::string description;
    EvidenceOrigin origin = EvidenceOrigin::system;
    long long captured_at = 0;
    bool stitch_fallback = false;
};

nlohmann::json grounding_to_json(const UIGrounding& g);
UIGrounding grounding_from_json(const nlohmann::json& j);

// Append-only search-result database. Ids start at 1 and strictly increase
// across origins. Readers on other threads see only fully appended records.
class EvidenceStore {
public:
    EvidenceStore() = default;
    // Persists each record as <dir>/<id>.png plus <dir>/<id>.grounding.json.
    explicit EvidenceStore(std::filesystem::path dir);

    std::shared_ptr<const EvidenceRecord> append(EvidenceRecord record);
    std::shared_ptr<const EvidenceRecord> get(int evidence_id) const;
    std::vector<std::shared_ptr<const EvidenceRecord>> all() const;
    std::size_t size() const;
    const std::optional<std::filesystem::path>& directory() const { return dir_; }

private:
    mutable std::shared_mutex mu_;
    std::vector<std::shared_ptr<const EvidenceRecord>> records_;
    std::optional<std::filesystem::path> dir_;
};

struct CaptureOutcome {
    std::shared_ptr<const EvidenceRecord> record;
    int scrolls = 0;            // downward scrolls performed
    int scroll_delta = 0;       // pixels per downward scroll
    int restore_delta = 0;      // single upward scroll returning to the start offset
    std::vector<std::string> warnings;
};

struct CaptureRequest {
    int subtask_id = 0;
    EvidenceOrigin origin = EvidenceOrigin::system;
    long long timestamp = 0;
    Perceiver* perceiver = nullptr;  // used only when the device has no ground truth
};

// Renders, scrolls down by scroll_fraction of the viewport, re-renders, up to
// scroll_count times or until the offset stops changing; stitches; rebuilds
// grounding in long-image coordinates; appends to `store`; scrolls back.
CaptureOutcome capture_scrolling(Device& device, EvidenceStore& store, const StitchConfig& config,
                                 const CaptureRequest& request);

// User-initiated capture: same pipeline, origin = user.
CaptureOutcome store_user_capture(Device& device, EvidenceStore& store, const StitchConfig& config,
                                  int subtask_id, long long timestamp, Perceiver* perceiver = nullptr);

// Splits a long image into segment_height slices, padding the last with white.
std::vector<Image> segment_image(const Image& long_image, int segment_height);

// Moves a per-segment box to long-image coordinates.
Rect offset_segment_bbox(const Rect& bbox, int segment_index, int segment_height);

}  // namespace dr
