#pragma once

// Shared geometry and domain vocabulary.

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace smartflow {

enum class ErrorCode {
    InvalidParameter,
    BudgetExceeded,
    HtmlParse,
    EmptyDiff,
    MissingDemonstration,
    AmbiguousLabel,
    UnknownField,
    InvalidDate,
    NavigationTimeout,
    WidgetParse,
    OptionNotFound,
    InvalidRequest,
    LoadError,
    CassetteMiss,
    ProviderUnavailable,
    ProviderTimeout,
    MappingParse,
    TemplateSlot,
    Persistence,
    Configuration,
    UndefinedMetric,
    IncompleteTruth,
};

std::string_view to_string(ErrorCode code);

/// Every failure in the library surfaces as this exception. `detail` carries
/// the structured payload an error kind defines (cleaned byte count for
/// BudgetExceeded, raw provider text for MappingParse, and so on).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, std::string detail = {})
        : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

struct Point {
    double x = 0;
    double y = 0;
    bool operator==(const Point&) const = default;
};

/// Axis-aligned pixel box; width and height are strictly positive.
class BBox {
public:
    BBox() = default;
    BBox(double x, double y, double w, double h);

    double x() const noexcept { return x_; }
    double y() const noexcept { return y_; }
    double w() const noexcept { return w_; }
    double h() const noexcept { return h_; }
    double right() const noexcept { return x_ + w_; }
    double bottom() const noexcept { return y_ + h_; }
    Point center() const noexcept { return {x_ + w_ / 2, y_ + h_ / 2}; }
    double area() const noexcept { return w_ * h_; }

    bool contains(Point p) const noexcept {
        return p.x >= x_ && p.x < right() && p.y >= y_ && p.y < bottom();
    }
    bool contains(const BBox& other) const noexcept {
        return other.x_ >= x_ && other.y_ >= y_ && other.right() <= right() &&
               other.bottom() <= bottom();
    }
    BBox translated(double dx, double dy) const { return {x_ + dx, y_ + dy, w_, h_}; }

    bool operator==(const BBox&) const = default;

private:
    double x_ = 0;
    double y_ = 0;
    double w_ = 1;
    double h_ = 1;
};

double iou(const BBox& a, const BBox& b) noexcept;
BBox union_box(const BBox& a, const BBox& b);

/// One OCR token. Text is stored trimmed and must be non-empty.
class TextRegion {
public:
    TextRegion(std::string text, BBox box, double confidence = 1.0);

    const std::string& text() const noexcept { return text_; }
    const BBox& box() const noexcept { return box_; }
    double confidence() const noexcept { return confidence_; }

    bool operator==(const TextRegion&) const = default;

private:
    std::string text_;
    BBox box_;
    double confidence_;
};

struct GridCell {
    int col = 0;
    int row = 0;
    auto operator<=>(const GridCell&) const = default;
};

enum class FieldKind { TextInput, TextArea, Dropdown, DatePicker, Radio, Checkbox, SubmitButton };

std::string_view to_string(FieldKind kind);
/// Unknown names degrade to TextInput.
FieldKind field_kind_from_string(std::string_view name);
bool is_choice(FieldKind kind) noexcept;

enum class Axis { Horizontal, Vertical };

GridCell grid_of(const BBox& box, double cell_size);
/// In-bounds subset of the eight cells around `cell`, row-major order.
std::vector<GridCell> neighbors8(GridCell cell, int grid_cols, int grid_rows);
/// Every cell the box's interior touches, row-major.
std::vector<GridCell> cells_covered(const BBox& box, double cell_size);

/// Overlap length on `axis` divided by the shorter extent, clamped to [0,1].
double axis_overlap(const BBox& a, const BBox& b, Axis axis) noexcept;

/// Euclidean distance between the nearest edges (0 when boxes touch or overlap).
double edge_gap(const BBox& a, const BBox& b) noexcept;

/// Stable reading order: group into lines by vertical center, then sort by x.
template <class T, class BoxOf>
void sort_reading_order(std::vector<T>& items, BoxOf box_of);

std::string trim(std::string_view s);
/// Lowercase and drop everything that is not an ASCII letter or digit.
std::string normalize_label(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Unit-cost Levenshtein distance over arbitrary sequences.
template <class Seq>
std::size_t edit_distance(const Seq& a, const Seq& b);

/// Stable 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace smartflow

#include "smartflow/core_inl.hpp"
