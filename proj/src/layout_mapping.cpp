#include "smartflow/layout_mapping.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "smartflow/csv.hpp"
#include "smartflow/frame.hpp"
#include "smartflow/llm_gateway.hpp"

namespace smartflow::layout {

using nlohmann::json;

namespace {

constexpr double kEdgeSlack = 2.0;  // px of tolerated overlap for "right of" / "below"

bool is_right_of(const BBox& anchor, const BBox& other, double min_overlap) {
    return other.x() >= anchor.right() - kEdgeSlack &&
           axis_overlap(anchor, other, Axis::Vertical) >= min_overlap;
}

bool is_below(const BBox& anchor, const BBox& other, double min_overlap) {
    return other.y() >= anchor.bottom() - kEdgeSlack &&
           axis_overlap(anchor, other, Axis::Horizontal) >= min_overlap;
}

bool inside_any(const BBox& box, const std::vector<BBox>& edits) {
    const Point c = box.center();
    return std::any_of(edits.begin(), edits.end(), [&](const BBox& e) { return e.contains(c); });
}

int containing_edit(const BBox& box, const std::vector<BBox>& edits) {
    const Point c = box.center();
    for (std::size_t i = 0; i < edits.size(); ++i)
        if (edits[i].contains(c)) return static_cast<int>(i);
    return -1;
}

void sort_entries(std::vector<MappingEntry>& entries) {
    sort_reading_order(entries, [](const MappingEntry& e) -> const BBox& { return e.edit_anchor; });
}

void append_hint(std::optional<std::string>& hint, const std::string& text) {
    hint = hint ? *hint + " " + text : text;
}

}  // namespace

std::string_view to_string(Source s) {
    switch (s) {
        case Source::RuleBased: return "RuleBased";
        case Source::VirtualGrid: return "VirtualGrid";
        case Source::Demonstration: return "Demonstration";
        case Source::AdminOverride: return "AdminOverride";
    }
    return "RuleBased";
}

Source source_from_string(std::string_view name) {
    for (Source s : {Source::RuleBased, Source::VirtualGrid, Source::Demonstration,
                     Source::AdminOverride})
        if (to_string(s) == name) return s;
    throw Error(ErrorCode::InvalidParameter, "unknown mapping source: " + std::string(name));
}

const MappingEntry* find_entry(const std::vector<MappingEntry>& entries, std::string_view name) {
    const std::string norm = normalize_label(name);
    for (const auto& e : entries)
        if (normalize_label(e.field_name) == norm) return &e;
    const std::string key = ocr_key(name);
    for (const auto& e : entries)
        if (ocr_key(e.field_name) == key) return &e;
    return nullptr;
}

const MappingEntry* MappingList::find(std::string_view name) const {
    const std::string norm = normalize_label(name);
    for (const auto& e : entries)
        if (normalize_label(e.field_name) == norm) return &e;
    return nullptr;
}

// ---- JSON / review ----

std::string to_json(const MappingList& list) {
    json j;
    j["width"] = list.width;
    j["height"] = list.height;
    j["entries"] = json::array();
    for (const auto& e : list.entries) {
        json row = {{"field", e.field_name},
                    {"kind", to_string(e.kind)},
                    {"box", {e.edit_anchor.x(), e.edit_anchor.y(), e.edit_anchor.w(), e.edit_anchor.h()}},
                    {"source", to_string(e.source)},
                    {"dom_id", e.dom_id},
                    {"required", e.required},
                    {"options", e.options}};
        row["hint"] = e.hint ? json(*e.hint) : json(nullptr);
        j["entries"].push_back(std::move(row));
    }
    j["warnings"] = list.warnings;
    return j.dump(2);
}

MappingList mapping_from_json(std::string_view text) {
    MappingList out;
    try {
        const json j = json::parse(text);
        out.width = j.value("width", 0);
        out.height = j.value("height", 0);
        for (const auto& row : j.at("entries")) {
            MappingEntry e;
            e.field_name = row.at("field").get<std::string>();
            if (trim(e.field_name).empty())
                throw Error(ErrorCode::LoadError, "mapping entry with empty field name");
            e.kind = field_kind_from_string(row.value("kind", "TextInput"));
            const auto& b = row.at("box");
            e.edit_anchor = BBox(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                                 b.at(3).get<double>());
            if (row.contains("hint") && row["hint"].is_string()) e.hint = row["hint"].get<std::string>();
            e.source = source_from_string(row.value("source", "AdminOverride"));
            e.dom_id = row.value("dom_id", "");
            e.required = row.value("required", false);
            e.options = row.value("options", std::vector<std::string>{});
            out.entries.push_back(std::move(e));
        }
        out.warnings = j.value("warnings", std::vector<std::string>{});
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::LoadError, std::string("bad mapping file: ") + ex.what());
    }
    return out;
}

std::string review_table(const MappingList& list) {
    std::ostringstream os;
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) s.append(w - s.size(), ' ');
        return s;
    };
    os << pad("#", 4) << pad("field", 26) << pad("kind", 14) << pad("anchor", 24) << pad("source", 15)
       << "hint\n";
    int i = 1;
    for (const auto& e : list.entries) {
        std::ostringstream box;
        box << e.edit_anchor.x() << "," << e.edit_anchor.y() << " " << e.edit_anchor.w() << "x"
            << e.edit_anchor.h();
        os << pad(std::to_string(i++), 4) << pad(e.field_name, 26) << pad(std::string(to_string(e.kind)), 14)
           << pad(box.str(), 24) << pad(std::string(to_string(e.source)), 15) << e.hint.value_or("")
           << "\n";
    }
    for (const auto& w : list.warnings) os << "warning: " << w << "\n";
    return os.str();
}

// ---- rule-based ----

MappingResult map_rule_based(const std::vector<TextRegion>& labels, const std::vector<BBox>& edits,
                             const RuleOptions& opt) {
    if (!(opt.cell_size > 0)) throw Error(ErrorCode::InvalidParameter, "cell_size must be positive");
    const double max_gap = 6 * opt.cell_size;

    // Text inside an edit is that edit's content, never a label.
    std::vector<std::size_t> texts;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (!inside_any(labels[i].box(), edits)) texts.push_back(i);

    struct Pair {
        double score;
        int dir;  // 0 right, 1 below
        std::size_t label, edit;
    };
    std::vector<Pair> pairs;
    for (std::size_t li : texts) {
        const BBox& l = labels[li].box();
        for (std::size_t ei = 0; ei < edits.size(); ++ei) {
            const BBox& e = edits[ei];
            int dir = -1;
            if (is_right_of(l, e, opt.min_overlap)) dir = 0;
            else if (is_below(l, e, opt.min_overlap)) dir = 1;
            if (dir < 0) continue;
            const double gap = edge_gap(l, e);
            if (gap <= max_gap) pairs.push_back({gap, dir, li, ei});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
        const BBox& ea = edits[a.edit];
        const BBox& eb = edits[b.edit];
        const BBox& la = labels[a.label].box();
        const BBox& lb = labels[b.label].box();
        return std::make_tuple(a.score, a.dir, ea.y(), ea.x(), la.y(), la.x()) <
               std::make_tuple(b.score, b.dir, eb.y(), eb.x(), lb.y(), lb.x());
    });

    std::vector<int> label_edit(labels.size(), -1);
    std::vector<int> edit_entry(edits.size(), -1);
    MappingResult out;
    for (const auto& p : pairs) {
        if (label_edit[p.label] >= 0 || edit_entry[p.edit] >= 0) continue;
        label_edit[p.label] = static_cast<int>(p.edit);
        edit_entry[p.edit] = static_cast<int>(out.entries.size());
        MappingEntry e;
        e.field_name = labels[p.label].text();
        e.edit_anchor = edits[p.edit];
        e.source = Source::RuleBased;
        out.entries.push_back(std::move(e));
    }

    // Leftovers: hints sit below or right of an edit, everything else is unmapped.
    for (std::size_t li : texts) {
        if (label_edit[li] >= 0) continue;
        const BBox& t = labels[li].box();
        int best = -1;
        double best_gap = 0;
        for (std::size_t ei = 0; ei < edits.size(); ++ei) {
            if (edit_entry[ei] < 0) continue;
            const BBox& e = edits[ei];
            if (!is_below(e, t, opt.min_overlap) && !is_right_of(e, t, opt.min_overlap)) continue;
            const double gap = edge_gap(e, t);
            if (gap > opt.hint_gap) continue;
            if (best < 0 || gap < best_gap) {
                best = static_cast<int>(ei);
                best_gap = gap;
            }
        }
        if (best >= 0)
            append_hint(out.entries[edit_entry[best]].hint, labels[li].text());
        else
            out.warnings.push_back("unmapped: " + labels[li].text());
    }
    sort_entries(out.entries);
    return out;
}

// ---- grid sheet ----

std::string_view to_string(Role r) {
    switch (r) {
        case Role::Label: return "label";
        case Role::Edit: return "edit";
        case Role::HintCandidate: return "hint-candidate";
    }
    return "label";
}

namespace {

Role role_from_string(std::string_view s) {
    for (Role r : {Role::Label, Role::Edit, Role::HintCandidate})
        if (to_string(r) == s) return r;
    throw Error(ErrorCode::LoadError, "unknown grid role: " + std::string(s));
}

std::string escape_token(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '\\' || c == '|') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> split_tokens(std::string_view s) {
    std::vector<std::string> out(1);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            out.back().push_back(s[++i]);
        } else if (s[i] == '|') {
            out.emplace_back();
        } else {
            out.back().push_back(s[i]);
        }
    }
    return out;
}

int parse_int(const std::string& s, const char* what) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::LoadError, std::string("bad ") + what + " in grid sheet: " + s);
    }
}

}  // namespace

std::string edit_token(std::size_t index) { return "[E" + std::to_string(index) + "]"; }

GridCell edit_anchor_cell(const BBox& edit, double cell_size) {
    const auto cells = cells_covered(edit, cell_size);
    const GridCell& a = cells.front();
    const GridCell& b = cells.back();
    return {(a.col + b.col) / 2, (a.row + b.row) / 2};
}

GridSheet build_grid_sheet(const std::vector<TextRegion>& frame, const std::vector<BBox>& edits,
                           double cell_size, int screen_w, int screen_h) {
    if (!(cell_size > 0)) throw Error(ErrorCode::InvalidParameter, "cell_size must be positive");
    GridSheet sheet;
    sheet.cell_size = cell_size;
    double w = screen_w, h = screen_h;
    for (const auto& r : frame) {
        w = std::max(w, r.box().right());
        h = std::max(h, r.box().bottom());
    }
    for (const auto& e : edits) {
        w = std::max(w, e.right());
        h = std::max(h, e.bottom());
    }
    sheet.cols = static_cast<int>(std::ceil(w / cell_size));
    sheet.rows = static_cast<int>(std::ceil(h / cell_size));
    const double hint_gap = cell_size;

    struct Placed {
        GridCell cell;
        Role role;
        BBox box;
        std::string text;
    };
    std::vector<Placed> placed;
    auto place = [&](const BBox& box, Role role, const std::string& text) {
        for (const GridCell& c : cells_covered(box, cell_size)) {
            if (c.col < 0 || c.row < 0 || c.col >= sheet.cols || c.row >= sheet.rows) continue;
            placed.push_back({c, role, box, text});
        }
    };

    for (const auto& r : frame) {
        const BBox& b = r.box();
        if (inside_any(b, edits)) continue;
        bool trails_edit = false, leads_edit = false;
        for (const auto& e : edits) {
            if ((is_below(e, b, 0.5) || is_right_of(e, b, 0.5)) && edge_gap(e, b) <= hint_gap)
                trails_edit = true;
            if ((is_right_of(b, e, 0.5) || is_below(b, e, 0.5)) && edge_gap(b, e) <= hint_gap)
                leads_edit = true;
        }
        place(b, trails_edit && !leads_edit ? Role::HintCandidate : Role::Label, r.text());
    }
    for (std::size_t i = 0; i < edits.size(); ++i) place(edits[i], Role::Edit, edit_token(i + 1));

    std::stable_sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) {
        return std::make_tuple(a.cell.row, a.cell.col, static_cast<int>(a.role), a.box.y(), a.box.x()) <
               std::make_tuple(b.cell.row, b.cell.col, static_cast<int>(b.role), b.box.y(), b.box.x());
    });
    for (auto& p : placed) sheet.cells[p.cell].push_back({std::move(p.text), p.role});
    return sheet;
}

std::string serialize(const GridSheet& sheet) {
    struct Row {
        GridCell cell;
        Role role;
        std::vector<std::string> tokens;
    };
    std::vector<Row> rows;
    for (const auto& [cell, tokens] : sheet.cells) {
        for (Role role : {Role::Label, Role::Edit, Role::HintCandidate}) {
            Row r{cell, role, {}};
            for (const auto& t : tokens)
                if (t.role == role) r.tokens.push_back(escape_token(t.text));
            if (!r.tokens.empty()) rows.push_back(std::move(r));
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return std::make_tuple(a.cell.row, a.cell.col, static_cast<int>(a.role)) <
               std::make_tuple(b.cell.row, b.cell.col, static_cast<int>(b.role));
    });
    std::string out = "row,col,role,text\n";
    for (const auto& r : rows)
        out += csv::format_row({std::to_string(r.cell.row), std::to_string(r.cell.col),
                                std::string(to_string(r.role)), join(r.tokens, "|")});
    return out;
}

GridSheet parse_grid_sheet(std::string_view csv_text, double cell_size, int cols, int rows) {
    if (!(cell_size > 0)) throw Error(ErrorCode::InvalidParameter, "cell_size must be positive");
    const auto records = csv::parse(csv_text);
    if (records.empty() || records[0] != csv::Row{"row", "col", "role", "text"})
        throw Error(ErrorCode::LoadError, "grid sheet header must be row,col,role,text");
    GridSheet sheet;
    sheet.cell_size = cell_size;
    sheet.cols = cols;
    sheet.rows = rows;
    for (std::size_t i = 1; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (rec.size() == 1 && rec[0].empty()) continue;
        if (rec.size() != 4) throw Error(ErrorCode::LoadError, "grid sheet record needs 4 fields");
        const GridCell cell{parse_int(rec[1], "col"), parse_int(rec[0], "row")};
        if (cell.col < 0 || cell.row < 0 || cell.col >= cols || cell.row >= rows)
            throw Error(ErrorCode::LoadError, "grid sheet cell out of bounds");
        const Role role = role_from_string(rec[2]);
        for (auto& t : split_tokens(rec[3])) sheet.cells[cell].push_back({std::move(t), role});
    }
    return sheet;
}

std::vector<std::string> sheet_labels(const GridSheet& sheet) {
    std::set<std::string> names;
    for (const auto& [cell, tokens] : sheet.cells)
        for (const auto& t : tokens)
            if (t.role == Role::Label) names.insert(t.text);
    return {names.begin(), names.end()};
}

namespace {

struct Component {
    std::string text;
    int c0, c1, r0, r1;
};

// 4-connected groups of cells carrying the same token text in one role.
std::vector<Component> components(const GridSheet& sheet, Role role) {
    std::map<std::string, std::set<GridCell>> by_text;
    for (const auto& [cell, tokens] : sheet.cells)
        for (const auto& t : tokens)
            if (t.role == role) by_text[t.text].insert(cell);
    std::vector<Component> out;
    for (auto& [text, cells] : by_text) {
        std::set<GridCell> seen;
        for (const GridCell& start : cells) {
            if (seen.count(start)) continue;
            Component comp{text, start.col, start.col, start.row, start.row};
            std::vector<GridCell> stack{start};
            seen.insert(start);
            while (!stack.empty()) {
                const GridCell c = stack.back();
                stack.pop_back();
                comp.c0 = std::min(comp.c0, c.col);
                comp.c1 = std::max(comp.c1, c.col);
                comp.r0 = std::min(comp.r0, c.row);
                comp.r1 = std::max(comp.r1, c.row);
                for (const GridCell n : {GridCell{c.col + 1, c.row}, GridCell{c.col - 1, c.row},
                                         GridCell{c.col, c.row + 1}, GridCell{c.col, c.row - 1}}) {
                    if (cells.count(n) && !seen.count(n)) {
                        seen.insert(n);
                        stack.push_back(n);
                    }
                }
            }
            out.push_back(comp);
        }
    }
    return out;
}

int cell_distance(const Component& a, const Component& b) {
    const int dx = std::max({0, a.c0 - b.c1, b.c0 - a.c1});
    const int dy = std::max({0, a.r0 - b.r1, b.r0 - a.r1});
    return std::max(dx, dy);
}

bool spans_overlap(int a0, int a1, int b0, int b1) { return a0 <= b1 && b0 <= a1; }

std::size_t edit_number(const std::string& token) {
    if (token.size() < 4 || token.rfind("[E", 0) != 0 || token.back() != ']') return 0;
    try {
        return static_cast<std::size_t>(std::stoul(token.substr(2, token.size() - 3)));
    } catch (const std::exception&) {
        return 0;
    }
}

}  // namespace

std::vector<GridMapping> map_grid_neighborhood(const GridSheet& sheet,
                                               std::vector<std::string>* warnings) {
    const auto labels = components(sheet, Role::Label);
    auto edits = components(sheet, Role::Edit);
    const auto hints = components(sheet, Role::HintCandidate);
    std::sort(edits.begin(), edits.end(), [](const Component& a, const Component& b) {
        return edit_number(a.text) < edit_number(b.text);
    });

    struct Cand {
        int dir, dist, r0, c0;
        std::size_t edit, label;
    };
    std::vector<Cand> cands;
    for (std::size_t ei = 0; ei < edits.size(); ++ei) {
        const auto& e = edits[ei];
        for (std::size_t li = 0; li < labels.size(); ++li) {
            const auto& l = labels[li];
            const int d = cell_distance(l, e);
            if (d > 1) continue;
            int dir = 2;
            if (spans_overlap(l.r0, l.r1, e.r0, e.r1) && l.c0 < e.c0) dir = 0;
            else if (spans_overlap(l.c0, l.c1, e.c0, e.c1) && l.r0 < e.r0) dir = 1;
            cands.push_back({dir, d, l.r0, l.c0, ei, li});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        return std::tie(a.dir, a.dist, a.r0, a.c0, a.edit, a.label) <
               std::tie(b.dir, b.dist, b.r0, b.c0, b.edit, b.label);
    });
    std::vector<int> edit_label(edits.size(), -1);
    std::vector<bool> label_used(labels.size(), false);
    for (const auto& c : cands) {
        if (edit_label[c.edit] >= 0 || label_used[c.label]) continue;
        edit_label[c.edit] = static_cast<int>(c.label);
        label_used[c.label] = true;
    }

    // Each hint goes to the closest mapped edit next to it.
    std::vector<std::optional<std::string>> edit_hint(edits.size());
    for (const auto& h : hints) {
        int best = -1, best_d = 2;
        for (std::size_t ei = 0; ei < edits.size(); ++ei) {
            if (edit_label[ei] < 0) continue;
            const int d = cell_distance(h, edits[ei]);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(ei);
            }
        }
        if (best >= 0) append_hint(edit_hint[best], h.text);
    }

    std::vector<GridMapping> out;
    for (std::size_t ei = 0; ei < edits.size(); ++ei) {
        const auto& e = edits[ei];
        if (edit_label[ei] < 0) {
            if (warnings) warnings->push_back("unmapped edit " + e.text);
            continue;
        }
        out.push_back({labels[edit_label[ei]].text, edit_number(e.text),
                       GridCell{(e.c0 + e.c1) / 2, (e.r0 + e.r1) / 2}, edit_hint[ei]});
    }
    return out;
}

MappingResult map_virtual_grid(const GridSheet& sheet, llm::Provider& provider,
                               const std::vector<BBox>& edits) {
    const llm::Slots slots = {{"sheet", serialize(sheet)},
                              {"cell_size", std::to_string(sheet.cell_size)},
                              {"cols", std::to_string(sheet.cols)},
                              {"rows", std::to_string(sheet.rows)}};
    const std::string response =
        provider.complete(llm::PromptTemplate::builtin(llm::Intent::GridMapping), slots);
    const auto assignments = llm::parse_grid_response(response, sheet_labels(sheet));

    MappingResult out;
    std::vector<bool> claimed(edits.size(), false);
    for (const auto& a : assignments) {
        int hit = -1;
        for (std::size_t i = 0; i < edits.size() && hit < 0; ++i)
            if (!claimed[i] && edit_anchor_cell(edits[i], sheet.cell_size) == a.cell)
                hit = static_cast<int>(i);
        for (std::size_t i = 0; i < edits.size() && hit < 0; ++i) {
            if (claimed[i]) continue;
            const auto cells = cells_covered(edits[i], sheet.cell_size);
            if (std::find(cells.begin(), cells.end(), a.cell) != cells.end()) hit = static_cast<int>(i);
        }
        if (hit < 0) {
            out.warnings.push_back("no edit at cell " + std::to_string(a.cell.row) + "," +
                                   std::to_string(a.cell.col) + " for " + a.field);
            continue;
        }
        claimed[hit] = true;
        MappingEntry e;
        e.field_name = a.field;
        e.edit_anchor = edits[hit];
        e.hint = a.hint;
        e.source = Source::VirtualGrid;
        out.entries.push_back(std::move(e));
    }
    for (std::size_t i = 0; i < edits.size(); ++i)
        if (!claimed[i]) out.warnings.push_back("unmapped edit " + edit_token(i + 1));
    sort_entries(out.entries);
    return out;
}

// ---- demonstration ----

namespace {

bool is_selection_marker(const std::string& text) {
    // "(x)" / "[x]" after OCR-key folding; unselected glyphs fold to "".
    return ocr_key(text) == "x" && text.size() <= 4;
}

}  // namespace

MappingResult map_by_demonstration(const std::vector<TextRegion>& empty_frame,
                                   const std::vector<TextRegion>& filled_frame,
                                   const std::map<std::string, std::string>& field_values,
                                   const std::vector<BBox>& edits, const RuleOptions& opt) {
    RenderedFrame before{empty_frame, 0, 0, 0};
    RenderedFrame after{filled_frame, 0, 0, 0};
    const auto added = diff_frames(before, after);
    if (added.empty()) throw Error(ErrorCode::EmptyDiff, "empty and filled frames are identical");

    // Candidate value regions: new text, and for choice glyphs the option
    // text right next to the newly marked glyph.
    std::vector<TextRegion> values;
    for (const auto& r : added) {
        if (!is_selection_marker(r.text())) {
            values.push_back(r);
            continue;
        }
        const TextRegion* best = nullptr;
        double best_gap = 0;
        for (const auto& o : filled_frame) {
            if (&o == &r || is_selection_marker(o.text()) || ocr_key(o.text()).empty()) continue;
            if (!is_right_of(r.box(), o.box(), 0.5)) continue;
            const double gap = edge_gap(r.box(), o.box());
            if (!best || gap < best_gap) {
                best = &o;
                best_gap = gap;
            }
        }
        if (best) values.push_back(*best);
    }

    auto anchor_for = [&](const BBox& b) {
        const int e = containing_edit(b, edits);
        return e >= 0 ? edits[e] : b;
    };

    // Which regions carry each value part.
    struct Want {
        std::string field;
        std::vector<std::string> parts;
    };
    std::vector<Want> wants;
    for (const auto& [field, value] : field_values) {
        Want w{field, {}};
        for (auto& p : split(value, ';'))
            if (!trim(p).empty()) w.parts.push_back(trim(p));
        if (w.parts.empty())
            throw Error(ErrorCode::MissingDemonstration, "empty dummy value for field " + field, field);
        wants.push_back(std::move(w));
    }

    std::map<std::string, std::vector<std::size_t>> regions_by_key;
    for (std::size_t i = 0; i < values.size(); ++i)
        regions_by_key[ocr_key(values[i].text())].push_back(i);
    std::map<std::string, std::vector<std::string>> fields_by_key;
    for (const auto& w : wants)
        for (const auto& p : w.parts) fields_by_key[ocr_key(p)].push_back(w.field);

    MappingResult out;
    std::map<std::string, std::vector<std::string>> ambiguous;  // key -> fields
    for (const auto& w : wants) {
        std::optional<BBox> anchor;
        bool is_ambiguous = false;
        for (const auto& p : w.parts) {
            const std::string key = ocr_key(p);
            const auto it = regions_by_key.find(key);
            if (it == regions_by_key.end())
                throw Error(ErrorCode::MissingDemonstration,
                            "no region shows the dummy value of field " + w.field, w.field);
            if (it->second.size() > 1 || fields_by_key[key].size() > 1) {
                is_ambiguous = true;
                ambiguous[key].push_back(w.field);
                break;
            }
            const BBox b = anchor_for(values[it->second.front()].box());
            anchor = anchor ? union_box(*anchor, b) : b;
        }
        if (is_ambiguous) continue;
        MappingEntry e;
        e.field_name = w.field;
        e.edit_anchor = *anchor;
        e.source = Source::Demonstration;
        out.entries.push_back(std::move(e));
    }

    // Shared dummy values: let the nearest visible label decide.
    for (const auto& [key, fields] : ambiguous) {
        std::vector<BBox> boxes;
        for (std::size_t i : regions_by_key[key]) {
            const BBox b = anchor_for(values[i].box());
            if (std::none_of(boxes.begin(), boxes.end(), [&](const BBox& x) { return x == b; }))
                boxes.push_back(b);
        }
        std::vector<TextRegion> labels;
        for (const auto& r : empty_frame)
            for (const auto& f : fields)
                if (normalize_label(r.text()) == normalize_label(f) || ocr_key(r.text()) == ocr_key(f))
                    labels.push_back(r);
        const auto resolved = map_rule_based(labels, boxes, opt);
        for (const auto& f : fields) {
            const MappingEntry* hit = find_entry(resolved.entries, f);
            if (!hit)
                throw Error(ErrorCode::MissingDemonstration,
                            "could not resolve the shared dummy value of field " + f, f);
            MappingEntry e = *hit;
            e.field_name = f;
            e.source = Source::Demonstration;
            out.entries.push_back(std::move(e));
        }
        out.warnings.push_back("dummy value shared by " + join(fields, ", ") +
                               "; resolved by nearest label");
    }
    sort_entries(out.entries);
    return out;
}

// ---- merge ----

MappingList merge_mapping_list(const std::vector<html::FormElementDecl>& decls,
                               const std::vector<MappingEntry>& entries, int screen_w, int screen_h) {
    std::map<std::string, std::vector<std::string>> seen;
    for (const auto& d : decls) seen[normalize_label(d.label)].push_back(d.label);
    std::vector<std::string> dups;
    for (const auto& [norm, labels] : seen)
        if (labels.size() > 1) dups.push_back(labels.front());
    if (!dups.empty())
        throw Error(ErrorCode::AmbiguousLabel, "duplicate labels on one page: " + join(dups, ", "),
                    join(dups, "\n"));

    MappingList out;
    out.width = screen_w;
    out.height = screen_h;
    std::vector<bool> used(entries.size(), false);
    auto take = [&](const html::FormElementDecl& d) -> int {
        const std::string norm = normalize_label(d.label);
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (!used[i] && normalize_label(entries[i].field_name) == norm) return static_cast<int>(i);
        const std::string key = ocr_key(d.label);
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (!used[i] && ocr_key(entries[i].field_name) == key) {
                out.warnings.push_back("label '" + entries[i].field_name + "' matched '" + d.label +
                                       "' only after OCR folding");
                return static_cast<int>(i);
            }
        return -1;
    };

    for (const auto& d : decls) {
        const int i = take(d);
        if (i < 0) {
            out.warnings.push_back("no layout entry for declared field '" + d.label + "'");
            continue;
        }
        used[i] = true;
        const MappingEntry& src = entries[i];
        const bool clash = std::any_of(out.entries.begin(), out.entries.end(), [&](const MappingEntry& e) {
            return e.edit_anchor == src.edit_anchor;
        });
        if (clash) {
            out.warnings.push_back("edit anchor of '" + d.label + "' already taken");
            continue;
        }
        MappingEntry e = src;
        e.field_name = d.label;
        e.kind = d.kind;
        e.dom_id = d.dom_id;
        e.required = d.required;
        e.options = d.options;
        out.entries.push_back(std::move(e));
    }
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (!used[i]) out.warnings.push_back("layout entry '" + entries[i].field_name + "' has no declaration");
    sort_entries(out.entries);
    return out;
}

double mapping_accuracy(const std::vector<MappingEntry>& entries,
                        const std::map<std::string, BBox>& truth) {
    if (truth.empty()) return 1.0;
    std::size_t ok = 0;
    for (const auto& [field, box] : truth) {
        const MappingEntry* e = find_entry(entries, field);
        if (e && iou(e->edit_anchor, box) >= 0.5) ++ok;
    }
    return static_cast<double>(ok) / static_cast<double>(truth.size());
}

std::vector<std::string> anchor_disagreements(const std::vector<MappingEntry>& a,
                                              const std::vector<MappingEntry>& b) {
    std::set<std::string> out;
    for (const auto& e : a) {
        const MappingEntry* other = find_entry(b, e.field_name);
        if (!other || iou(other->edit_anchor, e.edit_anchor) < 0.5) out.insert(e.field_name);
    }
    for (const auto& e : b)
        if (!find_entry(a, e.field_name)) out.insert(e.field_name);
    return {out.begin(), out.end()};
}

}  // namespace smartflow::layout
