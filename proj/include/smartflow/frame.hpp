#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smartflow/core.hpp"

namespace smartflow {

/// One simulated screen capture: OCR regions in reading order.
struct RenderedFrame {
    std::vector<TextRegion> regions;
    int width = 0;
    int height = 0;
    std::uint64_t frame_id = 0;
};

/// Regions of `after` with no match in `before` (equal text and IoU >= iou_min),
/// in `after` order.
std::vector<TextRegion> diff_frames(const RenderedFrame& before, const RenderedFrame& after,
                                    double iou_min = 0.5);

/// Key under which OCR look-alikes compare equal: case-folded alphanumerics
/// with 0/o, 1/l and c/e merged. Used wherever screen text is matched against
/// known strings.
std::string ocr_key(std::string_view text);

/// Index of the region whose ocr_key equals the key of `text`, or -1.
int find_region(const std::vector<TextRegion>& regions, std::string_view text);

}  // namespace smartflow
