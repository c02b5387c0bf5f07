#pragma once

// Field-name to edit-region association: rule-based, virtual grid and
// demonstration, plus the merge with DOM declarations.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "smartflow/core.hpp"
#include "smartflow/html_prep.hpp"

namespace smartflow::llm {
class Provider;
}

namespace smartflow::layout {

enum class Source { RuleBased, VirtualGrid, Demonstration, AdminOverride };

std::string_view to_string(Source s);
Source source_from_string(std::string_view name);

struct MappingEntry {
    std::string field_name;
    FieldKind kind = FieldKind::TextInput;
    BBox edit_anchor;
    std::optional<std::string> hint;
    Source source = Source::RuleBased;
    // Filled in by merge_mapping_list.
    std::string dom_id;
    bool required = false;
    std::vector<std::string> options;
};

struct MappingResult {
    std::vector<MappingEntry> entries;
    std::vector<std::string> warnings;
};

struct MappingList {
    std::vector<MappingEntry> entries;
    int width = 0;
    int height = 0;
    std::vector<std::string> warnings;

    /// Entry whose normalized name equals `name`'s, or nullptr.
    const MappingEntry* find(std::string_view name) const;
};

/// JSON form used for admin review files and the Workflow prompt.
std::string to_json(const MappingList& list);
MappingList mapping_from_json(std::string_view text);
/// Fixed-width review table.
std::string review_table(const MappingList& list);

// ---- rule-based ----

struct RuleOptions {
    double cell_size = 40;        // max_gap = 6 * cell_size
    double min_overlap = 0.5;
    double hint_gap = 40;
};

/// Labels pair with the nearest edit to their right or below; leftover text
/// near an edit becomes its hint, the rest is reported unmapped.
MappingResult map_rule_based(const std::vector<TextRegion>& labels, const std::vector<BBox>& edits,
                             const RuleOptions& opt = {});

// ---- virtual grid ----

enum class Role { Label, Edit, HintCandidate };

std::string_view to_string(Role r);

struct CellToken {
    std::string text;
    Role role = Role::Label;

    bool operator==(const CellToken&) const = default;
};

struct GridSheet {
    double cell_size = 40;
    int cols = 0;
    int rows = 0;
    /// Tokens of one cell grouped by role, reading order inside a role.
    std::map<GridCell, std::vector<CellToken>> cells;

    bool operator==(const GridSheet&) const = default;
};

/// Edit k (1-based, input order) appears as the token "[E<k>]".
std::string edit_token(std::size_t index);

/// Places every region and edit in each cell its box covers. Text inside an
/// edit box is the edit's content and is left out; text just below or right
/// of an edit with no edit of its own nearby is tagged hint-candidate.
GridSheet build_grid_sheet(const std::vector<TextRegion>& frame, const std::vector<BBox>& edits,
                           double cell_size, int screen_w, int screen_h);

/// Header `row,col,role,text`; one record per (cell, role), "|" between
/// tokens of a cell with `\|` and `\\` escapes.
std::string serialize(const GridSheet& sheet);
GridSheet parse_grid_sheet(std::string_view csv_text, double cell_size, int cols, int rows);

/// Label texts present in the sheet.
std::vector<std::string> sheet_labels(const GridSheet& sheet);

/// The deterministic 8-neighborhood mapper; returns one assignment per
/// mapped edit with the edit's anchor cell.
struct GridMapping {
    std::string field;
    std::size_t edit_index;  // 1-based
    GridCell cell;
    std::optional<std::string> hint;
};

std::vector<GridMapping> map_grid_neighborhood(const GridSheet& sheet,
                                               std::vector<std::string>* warnings = nullptr);

/// Cell an edit's answer refers to.
GridCell edit_anchor_cell(const BBox& edit, double cell_size);

/// Sends the sheet through the grid-mapping prompt and resolves the answer
/// cells back to edit boxes.
MappingResult map_virtual_grid(const GridSheet& sheet, llm::Provider& provider,
                               const std::vector<BBox>& edits);

// ---- demonstration ----

/// Diffs an empty and an admin-filled frame against the dummy values. With
/// `edits`, a value region is widened to the edit box containing it.
MappingResult map_by_demonstration(const std::vector<TextRegion>& empty_frame,
                                   const std::vector<TextRegion>& filled_frame,
                                   const std::map<std::string, std::string>& field_values,
                                   const std::vector<BBox>& edits = {},
                                   const RuleOptions& opt = {});

// ---- merge ----

/// Joins declarations and entries on normalized label; decls with no entry
/// and entries with no decl become warnings.
MappingList merge_mapping_list(const std::vector<html::FormElementDecl>& decls,
                               const std::vector<MappingEntry>& entries, int screen_w = 0,
                               int screen_h = 0);

/// Entry for `name`: normalized-label match first, then OCR-key match.
const MappingEntry* find_entry(const std::vector<MappingEntry>& entries, std::string_view name);

/// Fraction of `truth` fields (field name -> true edit box) whose entry
/// anchor overlaps the true box at IoU >= 0.5. Empty truth gives 1.
double mapping_accuracy(const std::vector<MappingEntry>& entries,
                        const std::map<std::string, BBox>& truth);

/// Field names of `a` whose anchor in `b` is missing or overlaps at IoU < 0.5,
/// plus names only `b` maps. Sorted.
std::vector<std::string> anchor_disagreements(const std::vector<MappingEntry>& a,
                                              const std::vector<MappingEntry>& b);

}  // namespace smartflow::layout
