#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>

namespace smartflow {

template <class T, class BoxOf>
void sort_reading_order(std::vector<T>& items, BoxOf box_of) {
    std::stable_sort(items.begin(), items.end(), [&](const T& a, const T& b) {
        const BBox& ba = box_of(a);
        const BBox& bb = box_of(b);
        if (ba.y() != bb.y()) return ba.y() < bb.y();
        return ba.x() < bb.x();
    });
    // Band into lines: an item joins the current line when its vertical
    // center lies within half the line head's height.
    std::vector<T> out;
    out.reserve(items.size());
    std::size_t i = 0;
    while (i < items.size()) {
        const BBox& head = box_of(items[i]);
        const double band = head.h() / 2;
        std::size_t j = i + 1;
        while (j < items.size() &&
               std::abs(box_of(items[j]).center().y - head.center().y) <= band)
            ++j;
        std::stable_sort(items.begin() + static_cast<std::ptrdiff_t>(i),
                         items.begin() + static_cast<std::ptrdiff_t>(j),
                         [&](const T& a, const T& b) { return box_of(a).x() < box_of(b).x(); });
        for (std::size_t k = i; k < j; ++k) out.push_back(std::move(items[k]));
        i = j;
    }
    items = std::move(out);
}

template <class Seq>
std::size_t edit_distance(const Seq& a, const Seq& b) {
    const std::size_t n = std::size(b);
    std::vector<std::size_t> prev(n + 1), cur(n + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    std::size_t i = 0;
    for (const auto& ca : a) {
        cur[0] = ++i;
        std::size_t j = 0;
        for (const auto& cb : b) {
            const std::size_t sub = prev[j] + (ca == cb ? 0 : 1);
            cur[j + 1] = std::min({prev[j + 1] + 1, cur[j] + 1, sub});
            ++j;
        }
        std::swap(prev, cur);
    }
    return prev[n];
}

}  // namespace smartflow
