#include "smartflow/frame.hpp"

#include <cctype>

namespace smartflow {

std::vector<TextRegion> diff_frames(const RenderedFrame& before, const RenderedFrame& after,
                                    double iou_min) {
    std::vector<bool> used(before.regions.size(), false);
    std::vector<TextRegion> out;
    for (const auto& r : after.regions) {
        bool matched = false;
        for (std::size_t i = 0; i < before.regions.size(); ++i) {
            if (used[i]) continue;
            const auto& b = before.regions[i];
            if (b.text() == r.text() && iou(b.box(), r.box()) >= iou_min) {
                used[i] = true;
                matched = true;
                break;
            }
        }
        if (!matched) out.push_back(r);
    }
    return out;
}

std::string ocr_key(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (char ch : text) {
        const auto u = static_cast<unsigned char>(ch);
        if (!std::isalnum(u)) continue;
        char c = static_cast<char>(std::tolower(u));
        if (c == '0') c = 'o';
        else if (c == '1') c = 'l';
        else if (c == 'c') c = 'e';
        out.push_back(c);
    }
    return out;
}

int find_region(const std::vector<TextRegion>& regions, std::string_view text) {
    const std::string key = ocr_key(text);
    for (std::size_t i = 0; i < regions.size(); ++i)
        if (ocr_key(regions[i].text()) == key) return static_cast<int>(i);
    return -1;
}

}  // namespace smartflow
