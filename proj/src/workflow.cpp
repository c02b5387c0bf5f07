#include "smartflow/workflow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

namespace smartflow::workflow {

using nlohmann::json;

// ---- requests ----

TaskRequest parse_task_request(std::string_view json_text) {
    TaskRequest r;
    try {
        const json j = json::parse(json_text);
        r.task_id = j.at("task_id").get<std::string>();
        r.site_id = j.at("site_id").get<std::string>();
        for (const auto& [k, v] : j.at("fields").items())
            r.fields[k] = v.is_string() ? v.get<std::string>() : v.dump();
        r.submitted_at = j.value("submitted_at", "");
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::LoadError, std::string("malformed task request: ") + ex.what());
    }
    if (trim(r.task_id).empty()) throw Error(ErrorCode::LoadError, "task request without task_id");
    if (r.fields.empty()) throw Error(ErrorCode::LoadError, "task request " + r.task_id + " has no fields");
    return r;
}

std::string to_json(const TaskRequest& request) {
    json j = {{"task_id", request.task_id},
              {"site_id", request.site_id},
              {"fields", request.fields},
              {"submitted_at", request.submitted_at}};
    return j.dump(2);
}

// ---- actions ----

std::string_view to_string(Op op) {
    switch (op) {
        case Op::Click: return "click";
        case Op::TypeText: return "type";
        case Op::PressKey: return "press";
        case Op::Scroll: return "scroll";
        case Op::Capture: return "capture";
        case Op::Wait: return "wait";
    }
    return "capture";
}

namespace {
Point whole(Point p) { return {std::round(p.x), std::round(p.y)}; }
long px(double v) { return std::lround(v); }
}  // namespace

Action Action::click(Point p, std::string field) {
    Action a;
    a.op = Op::Click;
    a.at = whole(p);
    a.field = std::move(field);
    return a;
}

Action Action::type(std::string text, std::string field) {
    Action a;
    a.op = Op::TypeText;
    a.text = std::move(text);
    a.field = std::move(field);
    return a;
}

Action Action::press(std::string key, std::string field) {
    Action a;
    a.op = Op::PressKey;
    a.text = std::move(key);
    a.field = std::move(field);
    return a;
}

Action Action::scroll(Point p, int delta_y, std::string field) {
    Action a;
    a.op = Op::Scroll;
    a.at = whole(p);
    a.delta_y = delta_y;
    a.field = std::move(field);
    return a;
}

Action Action::capture(std::string field) {
    Action a;
    a.op = Op::Capture;
    a.field = std::move(field);
    return a;
}

Action Action::wait(int ms, std::string field) {
    Action a;
    a.op = Op::Wait;
    a.ms = ms;
    a.field = std::move(field);
    return a;
}

namespace {

// Python string literal body.
std::string py_escape(std::string_view s) {
    std::string out;
    for (unsigned char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '"': out += "\\\""; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20 || c == 0x7f) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\x%02x", c);
                    out += buf;
                } else {
                    out.push_back(static_cast<char>(c));
                }
        }
    }
    return out;
}

}  // namespace

std::string emit_script_text(const ActionScript& script) {
    std::ostringstream os;
    for (const auto& a : script.actions) {
        switch (a.op) {
            case Op::Click: os << "click(" << px(a.at.x) << ", " << px(a.at.y) << ")\n"; break;
            case Op::TypeText: os << "typewrite(\"" << py_escape(a.text) << "\", interval=0.02)\n"; break;
            case Op::PressKey: os << "press(\"" << py_escape(a.text) << "\")\n"; break;
            case Op::Scroll:
                os << "scroll(" << a.delta_y << ", x=" << px(a.at.x) << ", y=" << px(a.at.y) << ")\n";
                break;
            case Op::Capture: os << "screenshot()\n"; break;
            case Op::Wait: os << "sleep(" << a.ms << ")\n"; break;
        }
    }
    return os.str();
}

std::string emit_script_jsonl(const ActionScript& script) {
    std::string out;
    for (const auto& a : script.actions) {
        json args = json::array();
        switch (a.op) {
            case Op::Click: args = {px(a.at.x), px(a.at.y)}; break;
            case Op::TypeText:
            case Op::PressKey: args = {a.text}; break;
            case Op::Scroll: args = {a.delta_y, px(a.at.x), px(a.at.y)}; break;
            case Op::Capture: break;
            case Op::Wait: args = {a.ms}; break;
        }
        json line = {{"op", to_string(a.op)}, {"args", args}, {"field", a.field}};
        out += line.dump() + "\n";
    }
    return out;
}

std::vector<std::string> provenance_segments(const ActionScript& script) {
    std::vector<std::string> out;
    std::string prev;
    for (const auto& a : script.actions) {
        if (a.field == prev) continue;
        prev = a.field;
        if (a.field != "control") out.push_back(a.field);
    }
    return out;
}

// ---- planning ----

const std::string& FieldPlan::value() const {
    static const std::string empty;
    return values.empty() ? empty : values.front();
}

std::vector<FieldPlan> plan_task(const layout::MappingList& mapping, const TaskRequest& request) {
    std::vector<std::string> unknown;
    for (const auto& [name, value] : request.fields) {
        const auto* e = mapping.find(name);
        if (!e || e->kind == FieldKind::SubmitButton) unknown.push_back(name);
    }
    if (!unknown.empty())
        throw Error(ErrorCode::UnknownField, "requested field not in mapping: " + join(unknown, ", "),
                    join(unknown, "\n"));

    std::vector<FieldPlan> plans;
    for (const auto& e : mapping.entries) {
        if (e.kind == FieldKind::SubmitButton) continue;
        const std::string norm = normalize_label(e.field_name);
        for (const auto& [name, value] : request.fields) {
            if (normalize_label(name) != norm) continue;
            FieldPlan p;
            p.field_name = e.field_name;
            p.kind = e.kind;
            p.anchor = e.edit_anchor.center();
            p.box = e.edit_anchor;
            p.dom_id = e.dom_id;
            if (is_choice(e.kind)) {
                for (const auto& part : split(value, ';'))
                    if (!trim(part).empty()) p.values.push_back(trim(part));
                if (e.kind == FieldKind::Radio && p.values.size() > 1)
                    throw Error(ErrorCode::InvalidRequest, "radio field " + e.field_name + " takes one value");
            } else {
                p.values.push_back(value);
            }
            plans.push_back(std::move(p));
        }
    }
    std::stable_sort(plans.begin(), plans.end(), [](const FieldPlan& a, const FieldPlan& b) {
        return std::make_pair(a.anchor.y, a.anchor.x) < std::make_pair(b.anchor.y, b.anchor.x);
    });
    return plans;
}

std::vector<Action> compile_text_field(const FieldPlan& plan) {
    return {Action::click(plan.anchor, plan.field_name), Action::type(plan.value(), plan.field_name)};
}

// ---- dates ----

Date parse_date(std::string_view iso) {
    Date d;
    char tail = 0;
    const std::string s(trim(iso));
    if (s.size() != 10 || std::sscanf(s.c_str(), "%4d-%2d-%2d%c", &d.year, &d.month, &d.day, &tail) != 3 ||
        s[4] != '-' || s[7] != '-')
        throw Error(ErrorCode::InvalidDate, "not a YYYY-MM-DD date: " + s);
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
        throw Error(ErrorCode::InvalidDate, "no such date: " + s);
    return d;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
    return buf;
}

int days_in_month(int year, int month) {
    static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month < 1 || month > 12) throw Error(ErrorCode::InvalidDate, "month out of range");
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    return month == 2 && leap ? 29 : kDays[month - 1];
}

int weekday(const Date& d) {
    // Sakamoto's method.
    static constexpr std::array<int, 12> t = {0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4};
    int y = d.year - (d.month < 3 ? 1 : 0);
    return (y + y / 4 - y / 100 + y / 400 + t[d.month - 1] + d.day) % 7;
}

Point date_cell_coordinate(const CalendarView& view, int day) {
    if (view.first_day_col < 0 || view.first_day_col > 6)
        throw Error(ErrorCode::InvalidParameter, "first_day_col outside 0..6");
    if (day < 1 || day > days_in_month(view.displayed_year, view.displayed_month))
        throw Error(ErrorCode::InvalidDate, "day " + std::to_string(day) + " not in month");
    const int index = view.first_day_col + day - 1;
    const int row = index / 7;
    const int col = index % 7;
    return {view.grid_origin.x + col * view.cell_w + view.cell_w / 2,
            view.grid_origin.y + row * view.cell_h + view.cell_h / 2};
}

// ---- environment ----

RenderedFrame EnvHandle::capture(const std::string& field) {
    log_.push_back(Action::capture(field));
    return env_->capture();
}

void EnvHandle::act(const Action& action) {
    log_.push_back(action);
    env_->perform(action);
}

std::vector<Action> EnvHandle::since(std::size_t mark) const {
    return {log_.begin() + static_cast<std::ptrdiff_t>(std::min(mark, log_.size())), log_.end()};
}

// ---- calendar reading ----

namespace {

constexpr std::array<const char*, 12> kMonths = {"January", "February", "March",     "April",
                                                 "May",     "June",     "July",      "August",
                                                 "September", "October", "November", "December"};
constexpr std::array<const char*, 7> kWeekdays = {"Su", "Mo", "Tu", "We", "Th", "Fr", "Sa"};

int month_of(const std::string& text) {
    const std::string key = ocr_key(text);
    for (std::size_t i = 0; i < kMonths.size(); ++i)
        if (ocr_key(kMonths[i]) == key) return static_cast<int>(i) + 1;
    return 0;
}

int weekday_of(const std::string& text) {
    const std::string key = ocr_key(text);
    for (std::size_t i = 0; i < kWeekdays.size(); ++i)
        if (ocr_key(kWeekdays[i]) == key) return static_cast<int>(i);
    return -1;
}

// Four-digit year with the usual OCR look-alikes folded back to digits.
int year_of(const std::string& text) {
    std::string digits;
    for (char c : text) {
        if (c == 'o' || c == 'O') c = '0';
        else if (c == 'l' || c == 'I') c = '1';
        if (c < '0' || c > '9') return 0;
        digits.push_back(c);
    }
    return digits.size() == 4 ? std::stoi(digits) : 0;
}

}  // namespace

CalendarView read_calendar(const RenderedFrame& frame, const BBox& edit) {
    const TextRegion* month = nullptr;
    int month_no = 0;
    for (const auto& r : frame.regions) {
        if (r.box().center().y <= edit.bottom()) continue;
        const int m = month_of(r.text());
        if (m && (!month || r.box().y() < month->box().y())) {
            month = &r;
            month_no = m;
        }
    }
    if (!month) throw Error(ErrorCode::WidgetParse, "calendar month header not found");

    // Weekday header row: the first row of weekday names under the month.
    std::vector<std::pair<const TextRegion*, int>> headers;
    double row_y = 0;
    for (const auto& r : frame.regions) {
        const double cy = r.box().center().y;
        if (cy <= month->box().center().y) continue;
        const int wd = weekday_of(r.text());
        if (wd < 0) continue;
        if (headers.empty() || cy < row_y - 2) {
            headers.clear();
            row_y = cy;
        }
        if (std::abs(cy - row_y) <= 2) headers.push_back({&r, wd});
    }
    if (headers.size() < 2) throw Error(ErrorCode::WidgetParse, "calendar weekday header not found");
    std::sort(headers.begin(), headers.end(), [](const auto& a, const auto& b) {
        return a.first->box().center().x < b.first->box().center().x;
    });
    const double x0 = headers.front().first->box().center().x;
    const double cw = (headers.back().first->box().center().x - x0) /
                      static_cast<double>(headers.size() - 1);
    if (!(cw > 0)) throw Error(ErrorCode::WidgetParse, "calendar columns collapse");
    std::array<int, 7> votes{};
    for (const auto& [r, wd] : headers) {
        const int col = static_cast<int>(std::lround((r->box().center().x - x0) / cw));
        ++votes[((wd - col) % 7 + 7) % 7];
    }
    const int week_start =
        static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
    const double ch = row_y - month->box().center().y;
    if (!(ch > 0)) throw Error(ErrorCode::WidgetParse, "calendar rows collapse");

    const double left = x0 - cw / 2, right = left + 7 * cw;
    int year = 0;
    for (const auto& r : frame.regions) {
        const Point c = r.box().center();
        if (c.y <= edit.bottom() || c.y >= month->box().center().y || c.x < left || c.x > right) continue;
        if (const int y = year_of(r.text())) year = y;
    }
    if (!year) throw Error(ErrorCode::WidgetParse, "calendar year not found");

    CalendarView v;
    v.displayed_month = month_no;
    v.displayed_year = year;
    v.cell_w = cw;
    v.cell_h = ch;
    v.grid_origin = {left, row_y + ch / 2};
    v.first_day_col = ((weekday({year, month_no, 1}) - week_start) % 7 + 7) % 7;
    return v;
}

namespace {

bool value_shown(const RenderedFrame& frame, const BBox& box, const std::string& value) {
    const std::string key = ocr_key(value);
    return std::any_of(frame.regions.begin(), frame.regions.end(), [&](const TextRegion& r) {
        return box.contains(r.box().center()) && ocr_key(r.text()) == key;
    });
}

const TextRegion* region_named(const RenderedFrame& frame, std::string_view text, double min_y) {
    for (const auto& r : frame.regions)
        if (r.box().center().y > min_y && r.text() == text) return &r;
    return nullptr;
}

}  // namespace

std::vector<Action> plan_datepicker(EnvHandle& env, const FieldPlan& field, const Date& target,
                                    const PlannerLimits& limits) {
    if (field.kind != FieldKind::DatePicker)
        throw Error(ErrorCode::InvalidParameter, field.field_name + " is not a datepicker");
    const std::size_t mark = env.mark();
    const std::string& name = field.field_name;
    const std::string iso = format_date(target);

    env.act(Action::click(field.anchor, name));
    env.act(Action::type(iso, name));
    RenderedFrame frame = env.capture(name);
    if (value_shown(frame, field.box, iso)) return env.since(mark);

    CalendarView view;
    try {
        view = read_calendar(frame, field.box);
    } catch (const Error&) {
        env.act(Action::click(field.anchor, name));
        frame = env.capture(name);
        view = read_calendar(frame, field.box);
    }

    int scrolls = 0;
    while (view.displayed_year != target.year) {
        if (++scrolls > limits.max_year_scrolls)
            throw Error(ErrorCode::NavigationTimeout, "year " + std::to_string(target.year) + " not reached");
        const int sign = target.year > view.displayed_year ? 1 : -1;
        const Point year_row{view.grid_origin.x + 3.5 * view.cell_w, view.grid_origin.y - 2.5 * view.cell_h};
        env.act(Action::scroll(year_row, -120 * sign, name));
        frame = env.capture(name);
        view = read_calendar(frame, field.box);
    }

    int clicks = 0;
    while (view.displayed_month != target.month || view.displayed_year != target.year) {
        if (++clicks > limits.max_month_clicks)
            throw Error(ErrorCode::NavigationTimeout, "month " + std::to_string(target.month) + " not reached");
        const bool forward = view.displayed_year < target.year ||
                             (view.displayed_year == target.year && view.displayed_month < target.month);
        const double nav_y = view.grid_origin.y - 1.5 * view.cell_h;
        const TextRegion* arrow = region_named(frame, forward ? ">" : "<", field.box.bottom());
        const Point at = arrow ? arrow->box().center()
                               : Point{view.grid_origin.x + (forward ? 6.5 : 0.5) * view.cell_w, nav_y};
        env.act(Action::click(at, name));
        frame = env.capture(name);
        view = read_calendar(frame, field.box);
    }

    env.act(Action::click(date_cell_coordinate(view, target.day), name));
    return env.since(mark);
}

std::vector<Action> plan_dropdown(EnvHandle& env, const FieldPlan& field, const std::string& value,
                                  const PlannerLimits& limits) {
    if (field.kind != FieldKind::Dropdown)
        throw Error(ErrorCode::InvalidParameter, field.field_name + " is not a dropdown");
    const std::size_t mark = env.mark();
    const std::string& name = field.field_name;
    const std::string key = ocr_key(value);

    const RenderedFrame closed = env.capture(name);
    env.act(Action::click(field.anchor, name));
    RenderedFrame open = env.capture(name);
    const auto opened = diff_frames(closed, open);
    if (opened.empty()) throw Error(ErrorCode::WidgetParse, "dropdown " + name + " did not open");

    BBox panel = opened.front().box();
    for (const auto& r : opened) panel = union_box(panel, r.box());
    // The panel spans the edit's width under it.
    panel = union_box(panel, BBox(field.box.x(), panel.y(), field.box.w(), panel.h()));
    double row_h = field.box.h();
    if (opened.size() > 1) {
        row_h = (opened.back().box().center().y - opened.front().box().center().y) /
                static_cast<double>(opened.size() - 1);
        if (!(row_h > 0)) row_h = field.box.h();
    }

    std::set<std::vector<std::string>> windows;
    std::vector<std::string> seen;
    for (int step = 0;; ++step) {
        std::vector<std::string> window;
        for (const auto& r : open.regions) {
            if (!panel.contains(r.box().center())) continue;
            if (ocr_key(r.text()) == key) {
                env.act(Action::click(r.box().center(), name));
                return env.since(mark);
            }
            window.push_back(r.text());
            if (std::find(seen.begin(), seen.end(), r.text()) == seen.end()) seen.push_back(r.text());
        }
        if (!windows.insert(window).second || step >= limits.max_dropdown_scrolls) {
            env.act(Action::press("escape", name));
            throw Error(ErrorCode::OptionNotFound, "option '" + value + "' not in dropdown " + name,
                        join(seen, "\n"));
        }
        env.act(Action::scroll(panel.center(), -static_cast<int>(std::lround(row_h)), name));
        open = env.capture(name);
    }
}

std::vector<Action> plan_choice(EnvHandle& env, const FieldPlan& field,
                                const std::vector<std::string>& values) {
    if (!is_choice(field.kind))
        throw Error(ErrorCode::InvalidParameter, field.field_name + " is not a choice field");
    if (field.kind == FieldKind::Radio && values.size() != 1)
        throw Error(ErrorCode::InvalidRequest, "radio field " + field.field_name + " takes exactly one value");
    const std::size_t mark = env.mark();
    const RenderedFrame frame = env.capture(field.field_name);

    std::vector<Point> targets;
    for (const auto& v : values) {
        const std::string key = ocr_key(v);
        const TextRegion* hit = nullptr;
        for (const auto& r : frame.regions)
            if (field.box.contains(r.box().center()) && ocr_key(r.text()) == key) {
                hit = &r;
                break;
            }
        if (!hit) {
            std::vector<std::string> seen;
            for (const auto& r : frame.regions)
                if (field.box.contains(r.box().center()) && !ocr_key(r.text()).empty() &&
                    ocr_key(r.text()) != "x")
                    seen.push_back(r.text());
            throw Error(ErrorCode::OptionNotFound, "option '" + v + "' not in " + field.field_name,
                        join(seen, "\n"));
        }
        targets.push_back(hit->box().center());
    }
    for (const Point& p : targets) env.act(Action::click(p, field.field_name));
    return env.since(mark);
}

std::vector<Action> execute_field(EnvHandle& env, const FieldPlan& field, const PlannerLimits& limits) {
    switch (field.kind) {
        case FieldKind::TextInput:
        case FieldKind::TextArea: {
            const std::size_t mark = env.mark();
            for (const auto& a : compile_text_field(field)) env.act(a);
            return env.since(mark);
        }
        case FieldKind::DatePicker: return plan_datepicker(env, field, parse_date(field.value()), limits);
        case FieldKind::Dropdown: return plan_dropdown(env, field, field.value(), limits);
        case FieldKind::Radio:
        case FieldKind::Checkbox: return plan_choice(env, field, field.values);
        case FieldKind::SubmitButton: break;
    }
    throw Error(ErrorCode::InvalidParameter, "submit buttons are not planned as fields");
}

}  // namespace smartflow::workflow
