#include "droidretriever/capture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>

#include "droidretriever/errors.hpp"

namespace dr {

OverlapMatch locate_overlap(const Image& earlier, const Image& later, int strip_height, double tolerance,
                            std::optional<int> expected_row) {
    if (earlier.width() != later.width()) throw PreconditionError("stitch: capture widths differ");
    const int s = std::min({strip_height, earlier.height(), later.height()});
    if (s <= 0) throw PreconditionError("stitch: empty capture");
    const int top = earlier.height() - s;
    const int candidates = later.height() - s + 1;
    const std::size_t row_bytes = static_cast<std::size_t>(earlier.width()) * 3;

    auto row_cost = [&](int strip_row, int later_row) {
        const auto a = earlier.row(top + strip_row);
        const auto b = later.row(later_row);
        long long sum = 0;
        for (std::size_t i = 0; i < row_bytes; ++i) sum += std::abs(int(a[i]) - int(b[i]));
        return sum;
    };

    // Cheap first-row pass orders the exhaustive search so the true overlap is
    // usually evaluated first and every other candidate is abandoned early.
    std::vector<std::pair<long long, int>> order;
    order.reserve(static_cast<std::size_t>(candidates));
    for (int y = 0; y < candidates; ++y) order.emplace_back(row_cost(0, y), y);
    std::sort(order.begin(), order.end());

    auto preferred = [&](int a, int b) {
        if (expected_row) {
            const int da = std::abs(a - *expected_row), db = std::abs(b - *expected_row);
            if (da != db) return da < db;
        }
        return a < b;
    };

    long long best_sum = std::numeric_limits<long long>::max();
    int best_row = 0;
    for (const auto& [first, y] : order) {
        if (first > best_sum) break;
        long long sum = first;
        for (int r = 1; r < s && sum <= best_sum; ++r) sum += row_cost(r, y + r);
        if (sum < best_sum || (sum == best_sum && preferred(y, best_row))) {
            best_sum = sum;
            best_row = y;
        }
    }
    OverlapMatch m;
    m.row = best_row;
    m.strip_height = s;
    m.mad = static_cast<double>(best_sum) / (static_cast<double>(s) * static_cast<double>(row_bytes));
    m.within_tolerance = m.mad <= tolerance;
    return m;
}

StitchResult stitch(const std::vector<Image>& captures, const StitchConfig& config,
                    const std::vector<std::optional<int>>& expected_rows) {
    if (captures.empty()) throw PreconditionError("stitch: no captures");
    for (const auto& c : captures)
        if (c.width() != captures.front().width()) throw PreconditionError("stitch: capture widths differ");
    StitchResult out;
    out.image = captures.front();
    out.first_new_row.push_back(0);
    out.long_row.push_back(0);
    for (std::size_t k = 1; k < captures.size(); ++k) {
        const auto hint = k < expected_rows.size() ? expected_rows[k] : std::nullopt;
        const auto m = locate_overlap(captures[k - 1], captures[k], config.template_strip_height,
                                      config.match_tolerance, hint);
        int from = 0;
        if (m.within_tolerance) from = m.overlap_rows();
        else out.fallback = true;
        out.first_new_row.push_back(from);
        out.long_row.push_back(out.image.height());
        out.image.append_rows(captures[k], from);
    }
    return out;
}

std::string_view to_string(EvidenceOrigin o) { return o == EvidenceOrigin::user ? "user" : "system"; }

nlohmann::json grounding_to_json(const UIGrounding& g) {
    nlohmann::json els = nlohmann::json::array();
    for (const auto& e : g.elements)
        els.push_back({{"index", e.index},
                       {"text", e.text},
                       {"kind", to_string(e.element_kind)},
                       {"bbox", {e.bbox.left, e.bbox.top, e.bbox.right, e.bbox.bottom}},
                       {"visited", e.visited_mask}});
    return {{"screen_ref", g.screen_ref},
            {"width", g.viewport_width},
            {"height", g.viewport_height},
            {"scroll_offset", g.scroll_offset},
            {"screen_kind", g.screen_kind ? nlohmann::json(to_string(*g.screen_kind)) : nlohmann::json()},
            {"elements", els}};
}

UIGrounding grounding_from_json(const nlohmann::json& j) {
    UIGrounding g;
    g.screen_ref = j.at("screen_ref").get<std::string>();
    g.viewport_width = j.at("width").get<int>();
    g.viewport_height = j.at("height").get<int>();
    g.scroll_offset = j.value("scroll_offset", 0);
    if (j.contains("screen_kind") && !j["screen_kind"].is_null())
        g.screen_kind = screen_kind_from(j["screen_kind"].get<std::string>());
    for (const auto& e : j.at("elements")) {
        UIElement el;
        el.index = e.at("index").get<int>();
        el.text = e.at("text").get<std::string>();
        el.element_kind = element_kind_from(e.at("kind").get<std::string>()).value_or(ElementKind::text);
        const auto& b = e.at("bbox");
        el.bbox = {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
        el.visited_mask = e.value("visited", false);
        g.elements.push_back(std::move(el));
    }
    return g;
}

EvidenceStore::EvidenceStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(*dir_);
}

std::shared_ptr<const EvidenceRecord> EvidenceStore::append(EvidenceRecord record) {
    std::unique_lock lock(mu_);
    record.evidence_id = static_cast<int>(records_.size()) + 1;
    for (const auto& e : record.grounding.elements)
        if (!e.bbox.inside({0, 0, record.long_image.width(), record.long_image.height()}))
            throw InvariantError("evidence grounding outside long image");
    if (dir_) {
        const auto id = std::to_string(record.evidence_id);
        write_png(record.long_image, *dir_ / (id + ".png"));
        nlohmann::json side = grounding_to_json(record.grounding);
        side["evidence_id"] = record.evidence_id;
        side["subtask_id"] = record.subtask_id;
        side["origin"] = to_string(record.origin);
        side["captured_at"] = record.captured_at;
        std::ofstream(*dir_ / (id + ".grounding.json")) << side.dump(2) << "\n";
    }
    auto ptr = std::make_shared<const EvidenceRecord>(std::move(record));
    records_.push_back(ptr);
    return ptr;
}

std::shared_ptr<const EvidenceRecord> EvidenceStore::get(int evidence_id) const {
    std::shared_lock lock(mu_);
    if (evidence_id < 1 || evidence_id > static_cast<int>(records_.size())) return nullptr;
    return records_[static_cast<std::size_t>(evidence_id - 1)];
}

std::vector<std::shared_ptr<const EvidenceRecord>> EvidenceStore::all() const {
    std::shared_lock lock(mu_);
    return records_;
}

std::size_t EvidenceStore::size() const {
    std::shared_lock lock(mu_);
    return records_.size();
}

std::vector<Image> segment_image(const Image& long_image, int segment_height) {
    if (segment_height <= 0) throw PreconditionError("segment height must be positive");
    std::vector<Image> out;
    for (int top = 0; top < long_image.height(); top += segment_height) {
        const int rows = std::min(segment_height, long_image.height() - top);
        Image seg = long_image.crop_rows(top, rows);
        if (rows < segment_height) seg.append_rows(Image(long_image.width(), segment_height - rows));
        out.push_back(std::move(seg));
    }
    return out;
}

Rect offset_segment_bbox(const Rect& bbox, int segment_index, int segment_height) {
    return bbox.shifted(0, segment_index * segment_height);
}

namespace {

// Maps canvas-coordinate truth boxes into the stitched image using the rows
// each capture contributed.
std::vector<TruthElement> map_truth(const ScreenTruth& truth, const std::vector<int>& offsets,
                                    const StitchResult& st, int viewport_height) {
    struct Span {
        int canvas_from, canvas_to, long_from;
    };
    std::vector<Span> spans;
    for (std::size_t k = 0; k < offsets.size(); ++k)
        spans.push_back({offsets[k] + st.first_new_row[k], offsets[k] + viewport_height, st.long_row[k]});
    const int long_h = st.image.height();
    auto map_row = [&](int c) -> std::optional<int> {
        for (const auto& s : spans)
            if (c >= s.canvas_from && c < s.canvas_to) return s.long_from + (c - s.canvas_from);
        return std::nullopt;
    };
    const int covered_from = offsets.front();
    const int covered_to = spans.back().canvas_to;
    std::vector<TruthElement> out;
    for (const auto& e : truth.elements) {
        const int top = std::max(e.bbox.top, covered_from);
        const int bottom = std::min(e.bbox.bottom, covered_to);
        if (top >= bottom) continue;
        const auto lt = map_row(top);
        if (!lt) continue;
        TruthElement m = e;
        m.bbox.top = *lt;
        m.bbox.bottom = std::min(long_h, *lt + (bottom - top));
        if (m.bbox.well_formed()) out.push_back(std::move(m));
    }
    return out;
}

}  // namespace

CaptureOutcome capture_scrolling(Device& device, EvidenceStore& store, const StitchConfig& config,
                                 const CaptureRequest& request) {
    if (config.scroll_fraction <= 0.0 || config.scroll_fraction >= 1.0)
        throw PreconditionError("scroll_fraction must lie in (0, 1)");
    const int h = device.viewport().height;
    if (config.template_strip_height <= 0 || config.template_strip_height >= h)
        throw PreconditionError("template strip must be shorter than the viewport");

    CaptureOutcome out;
    out.scroll_delta = std::max(1, static_cast<int>(std::floor(h * config.scroll_fraction)));
    const int start = device.viewport().scroll_offset;
    const auto truth = device.truth();

    std::vector<Image> captures{device.render().image};
    std::vector<int> offsets{start};
    std::vector<std::optional<int>> hints{std::nullopt};
    for (int i = 0; i < config.scroll_count; ++i) {
        const int before = device.viewport().scroll_offset;
        if (truth && before >= truth->canvas_height - h) break;  // already at the bottom
        device.execute(ActionCommand::scroll(Direction::down, out.scroll_delta));
        const int after = device.viewport().scroll_offset;
        auto shot = device.render().image;
        if (after == before || shot == captures.back()) break;
        ++out.scrolls;
        hints.push_back(h - config.template_strip_height - (after - before));
        captures.push_back(std::move(shot));
        offsets.push_back(after);
    }

    auto st = stitch(captures, config, hints);
    if (st.fallback) out.warnings.push_back("stitch: no overlap within tolerance; concatenated captures");

    std::vector<TruthElement> elements;
    std::optional<ScreenKind> kind;
    if (truth) {
        elements = map_truth(*truth, offsets, st, h);
        kind = truth->kind;
    } else if (request.perceiver) {
        const auto segments = segment_image(st.image, h);
        for (std::size_t i = 0; i < segments.size(); ++i)
            for (auto e : request.perceiver->detect(segments[i])) {
                e.bbox = offset_segment_bbox(e.bbox, static_cast<int>(i), h)
                             .intersect({0, 0, st.image.width(), st.image.height()});
                if (e.bbox.well_formed()) elements.push_back(std::move(e));
            }
    }

    EvidenceRecord rec;
    rec.subtask_id = request.subtask_id;
    rec.grounding = build_grounding(image_hash(st.image), elements, st.image.width(), st.image.height(), 0, kind);
    rec.description = describe(rec.grounding).text;
    rec.long_image = std::move(st.image);
    rec.origin = request.origin;
    rec.captured_at = request.timestamp;
    rec.stitch_fallback = st.fallback;
    out.record = store.append(std::move(rec));

    const int moved = device.viewport().scroll_offset - start;
    if (moved > 0) {
        device.execute(ActionCommand::scroll(Direction::up, moved));
        out.restore_delta = moved;
    }
    return out;
}

CaptureOutcome store_user_capture(Device& device, EvidenceStore& store, const StitchConfig& config,
                                  int subtask_id, long long timestamp, Perceiver* perceiver) {
    return capture_scrolling(device, store, config, {subtask_id, EvidenceOrigin::user, timestamp, perceiver});
}

}  // namespace dr
