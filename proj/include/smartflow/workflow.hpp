#pragma once

// Task requests, the action IR, and the planners that turn a mapping plus a
// request into GUI actions.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "smartflow/core.hpp"
#include "smartflow/frame.hpp"
#include "smartflow/layout_mapping.hpp"

namespace smartflow::workflow {

struct TaskRequest {
    std::string task_id;
    std::string site_id;
    std::map<std::string, std::string> fields;  // multi-values ";"-joined
    std::string submitted_at;
};

/// Throws Error(LoadError) on malformed JSON, missing ids or empty fields.
TaskRequest parse_task_request(std::string_view json_text);
std::string to_json(const TaskRequest& request);

enum class Op { Click, TypeText, PressKey, Scroll, Capture, Wait };

std::string_view to_string(Op op);

/// Coordinates are whole pixels. `field` names the field an action serves,
/// "control" for everything else.
struct Action {
    Op op = Op::Capture;
    Point at;
    std::string text;  // TypeText payload or PressKey key name
    int delta_y = 0;
    int ms = 0;
    std::string field = "control";

    static Action click(Point p, std::string field = "control");
    static Action type(std::string text, std::string field = "control");
    static Action press(std::string key, std::string field = "control");
    static Action scroll(Point p, int delta_y, std::string field = "control");
    static Action capture(std::string field = "control");
    static Action wait(int ms, std::string field = "control");

    bool operator==(const Action&) const = default;
};

struct ActionScript {
    std::vector<Action> actions;
    std::string task_id;
    int page_index = 1;
};

/// Scripting dialect, one command per line.
std::string emit_script_text(const ActionScript& script);
/// One {"op","args","field"} object per line.
std::string emit_script_jsonl(const ActionScript& script);

/// Fields served by the script, one per consecutive run of actions with the
/// same provenance; "control" runs are left out.
std::vector<std::string> provenance_segments(const ActionScript& script);

struct FieldPlan {
    std::string field_name;
    FieldKind kind = FieldKind::TextInput;
    std::vector<std::string> values;  // more than one only for Checkbox
    Point anchor;
    BBox box;
    std::string dom_id;

    const std::string& value() const;
};

/// One plan per requested field in mapping (screen) order. Throws
/// Error(UnknownField) before planning anything if a field has no row.
std::vector<FieldPlan> plan_task(const layout::MappingList& mapping, const TaskRequest& request);

std::vector<Action> compile_text_field(const FieldPlan& plan);

struct Date {
    int year = 0;
    int month = 1;
    int day = 1;

    bool operator==(const Date&) const = default;
};

/// Accepts YYYY-MM-DD; throws Error(InvalidDate).
Date parse_date(std::string_view iso);
std::string format_date(const Date& d);
int days_in_month(int year, int month);
/// 0 = Sunday.
int weekday(const Date& d);

struct CalendarView {
    int displayed_month = 1;
    int displayed_year = 2000;
    Point grid_origin;
    double cell_w = 0;
    double cell_h = 0;
    int first_day_col = 0;
};

/// Center of the day's cell; throws Error(InvalidDate) for days the month
/// does not have.
Point date_cell_coordinate(const CalendarView& view, int day);

/// Something the planners can look at and act on.
class Environment {
public:
    virtual ~Environment() = default;
    virtual RenderedFrame capture() = 0;
    virtual void perform(const Action& action) = 0;
};

/// Exclusive handle on an environment that records every action taken
/// through it, captures included.
class EnvHandle {
public:
    explicit EnvHandle(Environment& env) : env_(&env) {}

    RenderedFrame capture(const std::string& field = "control");
    void act(const Action& action);

    const std::vector<Action>& log() const noexcept { return log_; }
    std::size_t mark() const noexcept { return log_.size(); }
    std::vector<Action> since(std::size_t mark) const;

private:
    Environment* env_;
    std::vector<Action> log_;
};

struct PlannerLimits {
    int max_month_clicks = 240;
    int max_year_scrolls = 60;
    int max_dropdown_scrolls = 500;
};

/// Typing probe first, then calendar navigation. Returns the actions taken.
std::vector<Action> plan_datepicker(EnvHandle& env, const FieldPlan& field, const Date& target,
                                    const PlannerLimits& limits = {});
std::vector<Action> plan_dropdown(EnvHandle& env, const FieldPlan& field, const std::string& value,
                                  const PlannerLimits& limits = {});
std::vector<Action> plan_choice(EnvHandle& env, const FieldPlan& field,
                                const std::vector<std::string>& values);

/// Runs the planner matching the field's kind.
std::vector<Action> execute_field(EnvHandle& env, const FieldPlan& field,
                                  const PlannerLimits& limits = {});

/// Calendar geometry read off a captured frame; throws Error(WidgetParse).
CalendarView read_calendar(const RenderedFrame& frame, const BBox& edit);

}  // namespace smartflow::workflow
