#pragma once

// Deterministic virtual form: fixture loading, simulated OCR rendering,
// action application and grading hooks.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smartflow/core.hpp"
#include "smartflow/frame.hpp"
#include "smartflow/workflow.hpp"

namespace smartflow::sim {

struct OptionSpec {
    std::string text;
    std::optional<BBox> box;  // required for Radio/Checkbox
};

struct CalendarSpec {
    bool typing_allowed = false;
    int initial_month = 1;
    int initial_year = 2023;
    int week_start = 0;  // weekday shown in the first column, 0 = Sunday
    double cell_w = 32;
    double cell_h = 24;
};

struct WidgetSpec {
    std::string dom_id;
    FieldKind kind = FieldKind::TextInput;
    TextRegion label{"?", BBox(0, 0, 1, 1)};
    BBox edit;
    std::optional<TextRegion> hint;
    std::optional<std::string> placeholder;
    bool required = false;
    std::vector<OptionSpec> options;
    int window_rows = 5;
    bool wrap = false;
    CalendarSpec calendar;
};

enum class SubmitKind { NextPage, FinalSubmit };

enum class Condition { Always, RequiredMissing, FieldEquals };
enum class Effect { Stay, Advance, Finish };

/// `message` may contain "{field}", replaced by the label of the first
/// missing required widget.
struct FeedbackRule {
    Condition when = Condition::Always;
    std::string field;
    std::string value;
    std::string message;
    Effect effect = Effect::Stay;
};

struct SubmitSpec {
    std::string text = "Submit";
    BBox box;
    SubmitKind kind = SubmitKind::FinalSubmit;
};

struct PageSpec {
    std::optional<TextRegion> title;
    std::vector<WidgetSpec> elements;
    SubmitSpec submit;
    BBox feedback_box;
    std::vector<FeedbackRule> rules;
};

struct VirtualForm {
    std::string name;
    int width = 1280;
    int height = 1024;
    std::vector<PageSpec> pages;
};

/// Throws Error(LoadError) naming the offending widget.
VirtualForm parse_fixture(std::string_view json_text);
VirtualForm load_fixture(const std::string& path);

struct Noise {
    double rate = 0;
    std::uint64_t seed = 0;
};

/// Character substitution at `rate`: o/0, l/1 and e/c swap with their
/// partner, other letters flip case, everything else stays.
std::string corrupt(std::string_view text, double rate, std::uint64_t seed);

struct WidgetState {
    std::string text;            // text, dropdown choice or date
    std::vector<bool> selected;  // choice widgets
    int scroll_offset = 0;
    int cal_month = 1;
    int cal_year = 2023;
};

struct EnvState {
    int page_index = 1;
    std::vector<std::vector<WidgetState>> widgets;  // [page][widget]
    int focused = -1;
    int open_dropdown = -1;
    int open_calendar = -1;
    bool finished = false;
    std::optional<std::string> feedback;
    std::vector<std::string> warnings;
};

EnvState initial_state(const VirtualForm& form);

RenderedFrame render(const VirtualForm& form, const EnvState& state, const Noise& noise,
                     std::uint64_t frame_id = 0);

EnvState apply(const VirtualForm& form, EnvState state, const workflow::Action& action);

/// Label -> committed value for every widget on every page.
std::map<std::string, std::string> read_filled_values(const VirtualForm& form, const EnvState& state);

/// Popup geometry, shared with tests.
BBox dropdown_panel(const WidgetSpec& w);
BBox calendar_popup(const WidgetSpec& w);

/// One interactive run against a form.
class Session : public workflow::Environment {
public:
    explicit Session(VirtualForm form, Noise noise = {});

    RenderedFrame capture() override;
    void perform(const workflow::Action& action) override;

    const VirtualForm& form() const noexcept { return form_; }
    const EnvState& state() const noexcept { return state_; }
    const PageSpec& page() const;

    /// Edit boxes of the current page in fixture order (the detector
    /// stand-in strategies receive).
    std::vector<BBox> edit_boxes() const;

    /// Sets a widget's committed value directly, as an admin filling the
    /// form by hand would. Checkbox values are ";"-joined.
    void admin_fill(std::string_view label, const std::string& value);

    /// Shows page `index` (1-based) with popups closed, as an admin would
    /// by navigating there directly.
    void admin_goto_page(int index);
    std::map<std::string, std::string> filled_values() const { return read_filled_values(form_, state_); }
    std::uint64_t frames() const noexcept { return frame_id_; }

private:
    VirtualForm form_;
    Noise noise_;
    EnvState state_;
    std::uint64_t frame_id_ = 0;
};

}  // namespace smartflow::sim
