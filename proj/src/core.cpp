#include "smartflow/core.hpp"

#include <array>
#include <cctype>
#include <cmath>

namespace smartflow {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidParameter: return "invalid-parameter";
        case ErrorCode::BudgetExceeded: return "budget-exceeded";
        case ErrorCode::HtmlParse: return "html-parse";
        case ErrorCode::EmptyDiff: return "empty-diff";
        case ErrorCode::MissingDemonstration: return "missing-demonstration";
        case ErrorCode::AmbiguousLabel: return "ambiguous-label";
        case ErrorCode::UnknownField: return "unknown-field";
        case ErrorCode::InvalidDate: return "invalid-date";
        case ErrorCode::NavigationTimeout: return "navigation-timeout";
        case ErrorCode::WidgetParse: return "widget-parse";
        case ErrorCode::OptionNotFound: return "option-not-found";
        case ErrorCode::InvalidRequest: return "invalid-request";
        case ErrorCode::LoadError: return "load-error";
        case ErrorCode::CassetteMiss: return "cassette-miss";
        case ErrorCode::ProviderUnavailable: return "provider-unavailable";
        case ErrorCode::ProviderTimeout: return "provider-timeout";
        case ErrorCode::MappingParse: return "mapping-parse";
        case ErrorCode::TemplateSlot: return "template-slot";
        case ErrorCode::Persistence: return "persistence";
        case ErrorCode::Configuration: return "configuration";
        case ErrorCode::UndefinedMetric: return "undefined-metric";
        case ErrorCode::IncompleteTruth: return "incomplete-truth";
    }
    return "unknown";
}

BBox::BBox(double x, double y, double w, double h) : x_(x), y_(y), w_(w), h_(h) {
    if (!(w > 0) || !(h > 0))
        throw Error(ErrorCode::InvalidParameter, "bounding box needs positive width and height");
}

double iou(const BBox& a, const BBox& b) noexcept {
    const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x(), b.x()));
    const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y(), b.y()));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni > 0 ? inter / uni : 0.0;
}

BBox union_box(const BBox& a, const BBox& b) {
    const double x = std::min(a.x(), b.x());
    const double y = std::min(a.y(), b.y());
    return {x, y, std::max(a.right(), b.right()) - x, std::max(a.bottom(), b.bottom()) - y};
}

TextRegion::TextRegion(std::string text, BBox box, double confidence)
    : text_(trim(text)), box_(box), confidence_(confidence) {
    if (text_.empty()) throw Error(ErrorCode::InvalidParameter, "text region with empty text");
    if (!(confidence >= 0.0 && confidence <= 1.0))
        throw Error(ErrorCode::InvalidParameter, "confidence outside [0,1]");
}

namespace {
constexpr std::array<std::string_view, 7> kKindNames = {
    "TextInput", "TextArea", "Dropdown", "DatePicker", "Radio", "Checkbox", "SubmitButton"};
}

std::string_view to_string(FieldKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

FieldKind field_kind_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i)
        if (kKindNames[i] == name) return static_cast<FieldKind>(i);
    return FieldKind::TextInput;
}

bool is_choice(FieldKind kind) noexcept {
    return kind == FieldKind::Radio || kind == FieldKind::Checkbox;
}

GridCell grid_of(const BBox& box, double cell_size) {
    if (!(cell_size > 0)) throw Error(ErrorCode::InvalidParameter, "cell_size must be positive");
    const Point c = box.center();
    return {static_cast<int>(std::floor(c.x / cell_size)),
            static_cast<int>(std::floor(c.y / cell_size))};
}

std::vector<GridCell> neighbors8(GridCell cell, int grid_cols, int grid_rows) {
    if (cell.col < 0 || cell.row < 0 || cell.col >= grid_cols || cell.row >= grid_rows)
        throw Error(ErrorCode::InvalidParameter, "cell outside the grid");
    std::vector<GridCell> out;
    for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const GridCell n{cell.col + dc, cell.row + dr};
            if (n.col >= 0 && n.row >= 0 && n.col < grid_cols && n.row < grid_rows)
                out.push_back(n);
        }
    return out;
}

std::vector<GridCell> cells_covered(const BBox& box, double cell_size) {
    if (!(cell_size > 0)) throw Error(ErrorCode::InvalidParameter, "cell_size must be positive");
    // Half-open interior: a box ending exactly on a cell edge does not spill over.
    const int c0 = static_cast<int>(std::floor(box.x() / cell_size));
    const int c1 = static_cast<int>(std::ceil(box.right() / cell_size)) - 1;
    const int r0 = static_cast<int>(std::floor(box.y() / cell_size));
    const int r1 = static_cast<int>(std::ceil(box.bottom() / cell_size)) - 1;
    std::vector<GridCell> out;
    for (int r = r0; r <= std::max(r0, r1); ++r)
        for (int c = c0; c <= std::max(c0, c1); ++c) out.push_back({c, r});
    return out;
}

double axis_overlap(const BBox& a, const BBox& b, Axis axis) noexcept {
    double lo, hi, shorter;
    if (axis == Axis::Horizontal) {
        lo = std::max(a.x(), b.x());
        hi = std::min(a.right(), b.right());
        shorter = std::min(a.w(), b.w());
    } else {
        lo = std::max(a.y(), b.y());
        hi = std::min(a.bottom(), b.bottom());
        shorter = std::min(a.h(), b.h());
    }
    return std::clamp((hi - lo) / shorter, 0.0, 1.0);
}

double edge_gap(const BBox& a, const BBox& b) noexcept {
    const double dx = std::max({0.0, b.x() - a.right(), a.x() - b.right()});
    const double dy = std::max({0.0, b.y() - a.bottom(), a.y() - b.bottom()});
    return std::hypot(dx, dy);
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string normalize_label(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char ch : s) {
        const auto u = static_cast<unsigned char>(ch);
        if (std::isalnum(u)) out.push_back(static_cast<char>(std::tolower(u)));
    }
    return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace smartflow
