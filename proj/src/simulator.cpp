#include "smartflow/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace smartflow::sim {

using nlohmann::json;
using workflow::Action;
using workflow::Op;

namespace {

constexpr double kCharW = 8;
constexpr double kTextH = 16;
constexpr std::array<const char*, 12> kMonths = {"January", "February", "March",     "April",
                                                 "May",     "June",     "July",      "August",
                                                 "September", "October", "November", "December"};
constexpr std::array<const char*, 7> kWeekdays = {"Su", "Mo", "Tu", "We", "Th", "Fr", "Sa"};

BBox text_at(double x, double cy, std::string_view text) {
    return {x, cy - kTextH / 2, std::max(kCharW, kCharW * static_cast<double>(text.size())), kTextH};
}

BBox text_centered(Point c, std::string_view text) {
    const double w = std::max(kCharW, kCharW * static_cast<double>(text.size()));
    return {c.x - w / 2, c.y - kTextH / 2, w, kTextH};
}

bool overlaps(const BBox& a, const BBox& b) {
    return a.x() < b.right() && b.x() < a.right() && a.y() < b.bottom() && b.y() < a.bottom();
}

// ---- fixture parsing ----

BBox box_of(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 4)
        throw Error(ErrorCode::LoadError, where + ": box must be [x, y, w, h]");
    try {
        return BBox(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
    } catch (const Error&) {
        throw Error(ErrorCode::LoadError, where + ": box needs positive size");
    }
}

TextRegion region_of(const json& j, const std::string& where) {
    const std::string text = j.at("text").get<std::string>();
    if (trim(text).empty()) throw Error(ErrorCode::LoadError, where + ": empty text");
    return TextRegion(text, box_of(j.at("box"), where));
}

Condition condition_of(const std::string& s, const std::string& where) {
    if (s == "Always") return Condition::Always;
    if (s == "RequiredMissing") return Condition::RequiredMissing;
    if (s == "FieldEquals") return Condition::FieldEquals;
    throw Error(ErrorCode::LoadError, where + ": unknown rule condition " + s);
}

Effect effect_of(const std::string& s, const std::string& where) {
    if (s == "Stay") return Effect::Stay;
    if (s == "Advance") return Effect::Advance;
    if (s == "Finish") return Effect::Finish;
    throw Error(ErrorCode::LoadError, where + ": unknown rule effect " + s);
}

void validate(const VirtualForm& form) {
    const BBox screen(0, 0, form.width, form.height);
    if (form.pages.empty()) throw Error(ErrorCode::LoadError, "fixture has no pages");
    for (std::size_t p = 0; p < form.pages.size(); ++p) {
        const auto& page = form.pages[p];
        const std::string where = "page " + std::to_string(p + 1);
        std::set<std::string> ids;
        for (const auto& w : page.elements) {
            const std::string wname = where + " widget " + w.dom_id;
            if (w.dom_id.empty()) throw Error(ErrorCode::LoadError, where + ": widget without dom_id");
            if (!ids.insert(w.dom_id).second) throw Error(ErrorCode::LoadError, wname + ": duplicate dom_id");
            if (!screen.contains(w.edit) || !screen.contains(w.label.box()))
                throw Error(ErrorCode::LoadError, wname + ": outside the page");
            if ((w.kind == FieldKind::Dropdown || is_choice(w.kind)) && w.options.empty())
                throw Error(ErrorCode::LoadError, wname + ": needs at least one option");
            if (is_choice(w.kind))
                for (const auto& o : w.options)
                    if (!o.box || !w.edit.contains(*o.box))
                        throw Error(ErrorCode::LoadError, wname + ": option box must lie inside the edit");
            if (w.kind == FieldKind::Dropdown && w.window_rows < 1)
                throw Error(ErrorCode::LoadError, wname + ": window_rows must be positive");
            if (w.kind == FieldKind::SubmitButton)
                throw Error(ErrorCode::LoadError, wname + ": submit controls go under 'submit'");
            if (w.calendar.week_start < 0 || w.calendar.week_start > 6)
                throw Error(ErrorCode::LoadError, wname + ": week_start outside 0..6");
        }
        for (std::size_t i = 0; i < page.elements.size(); ++i)
            for (std::size_t j = i + 1; j < page.elements.size(); ++j)
                if (iou(page.elements[i].edit, page.elements[j].edit) > 0.3)
                    throw Error(ErrorCode::LoadError, where + " widget " + page.elements[j].dom_id +
                                                          ": overlaps " + page.elements[i].dom_id);
        if (!screen.contains(page.submit.box)) throw Error(ErrorCode::LoadError, where + ": submit outside the page");
    }
}

}  // namespace

VirtualForm parse_fixture(std::string_view json_text) {
    VirtualForm form;
    try {
        const json j = json::parse(json_text);
        form.name = j.value("name", "");
        form.width = j.value("width", 1280);
        form.height = j.value("height", 1024);
        if (!j.contains("pages") || !j["pages"].is_array())
            throw Error(ErrorCode::LoadError, "fixture needs a pages array");
        int pno = 0;
        for (const auto& jp : j["pages"]) {
            ++pno;
            const std::string where = "page " + std::to_string(pno);
            PageSpec page;
            if (jp.contains("title")) page.title = region_of(jp["title"], where + " title");
            for (const auto& je : jp.value("elements", json::array())) {
                WidgetSpec w;
                w.dom_id = je.value("dom_id", "");
                const std::string wname = where + " widget " + w.dom_id;
                w.kind = field_kind_from_string(je.value("kind", "TextInput"));
                if (!je.contains("label")) throw Error(ErrorCode::LoadError, wname + ": missing label");
                w.label = region_of(je["label"], wname);
                if (!je.contains("edit")) throw Error(ErrorCode::LoadError, wname + ": missing edit box");
                w.edit = box_of(je["edit"], wname);
                if (je.contains("hint") && !je["hint"].is_null()) w.hint = region_of(je["hint"], wname + " hint");
                if (je.contains("placeholder") && je["placeholder"].is_string())
                    w.placeholder = je["placeholder"].get<std::string>();
                w.required = je.value("required", false);
                for (const auto& jo : je.value("options", json::array())) {
                    OptionSpec o;
                    if (jo.is_string()) {
                        o.text = jo.get<std::string>();
                    } else {
                        o.text = jo.at("text").get<std::string>();
                        if (jo.contains("box")) o.box = box_of(jo["box"], wname + " option");
                    }
                    w.options.push_back(std::move(o));
                }
                w.window_rows = je.value("window_rows", 5);
                w.wrap = je.value("wrap", false);
                if (je.contains("calendar")) {
                    const auto& jc = je["calendar"];
                    w.calendar.typing_allowed = jc.value("typing_allowed", false);
                    w.calendar.initial_month = jc.value("initial_month", 1);
                    w.calendar.initial_year = jc.value("initial_year", 2023);
                    w.calendar.week_start = jc.value("week_start", 0);
                    w.calendar.cell_w = jc.value("cell_w", 32.0);
                    w.calendar.cell_h = jc.value("cell_h", 24.0);
                }
                page.elements.push_back(std::move(w));
            }
            if (!jp.contains("submit")) throw Error(ErrorCode::LoadError, where + ": missing submit control");
            const auto& js = jp["submit"];
            page.submit.text = js.value("text", "Submit");
            page.submit.box = box_of(js.at("box"), where + " submit");
            const std::string kind = js.value("kind", "FinalSubmit");
            if (kind == "NextPage") page.submit.kind = SubmitKind::NextPage;
            else if (kind == "FinalSubmit") page.submit.kind = SubmitKind::FinalSubmit;
            else throw Error(ErrorCode::LoadError, where + ": unknown submit kind " + kind);
            page.feedback_box = jp.contains("feedback_box")
                                    ? box_of(jp["feedback_box"], where + " feedback")
                                    : BBox(page.submit.box.x(), page.submit.box.bottom() + 20, 600, 24);
            for (const auto& jr : jp.value("feedback_rules", json::array())) {
                FeedbackRule r;
                r.when = condition_of(jr.value("when", "Always"), where);
                r.field = jr.value("field", "");
                r.value = jr.value("value", "");
                r.message = jr.value("message", "");
                r.effect = effect_of(jr.value("effect", "Stay"), where);
                page.rules.push_back(std::move(r));
            }
            form.pages.push_back(std::move(page));
        }
    } catch (const json::exception& ex) {
        throw Error(ErrorCode::LoadError, std::string("malformed fixture: ") + ex.what());
    }
    validate(form);
    return form;
}

VirtualForm load_fixture(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::LoadError, "cannot read fixture " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_fixture(ss.str());
}

// ---- noise ----

std::string corrupt(std::string_view text, double rate, std::uint64_t seed) {
    if (!(rate >= 0 && rate < 1)) throw Error(ErrorCode::InvalidParameter, "noise rate outside [0,1)");
    std::string out(text);
    if (rate == 0) return out;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (char& c : out) {
        if (u(rng) >= rate) continue;
        switch (c) {
            case 'o': c = '0'; break;
            case 'O': c = '0'; break;
            case '0': c = 'o'; break;
            case 'l': c = '1'; break;
            case '1': c = 'l'; break;
            case 'e': c = 'c'; break;
            case 'c': c = 'e'; break;
            default:
                if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
                else if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
    }
    return out;
}

// ---- state ----

EnvState initial_state(const VirtualForm& form) {
    EnvState s;
    for (const auto& page : form.pages) {
        std::vector<WidgetState> ws;
        for (const auto& w : page.elements) {
            WidgetState st;
            st.selected.assign(w.options.size(), false);
            st.cal_month = w.calendar.initial_month;
            st.cal_year = w.calendar.initial_year;
            ws.push_back(std::move(st));
        }
        s.widgets.push_back(std::move(ws));
    }
    return s;
}

BBox dropdown_panel(const WidgetSpec& w) {
    const int rows = std::min<int>(w.window_rows, static_cast<int>(w.options.size()));
    return {w.edit.x(), w.edit.bottom(), w.edit.w(), std::max(1, rows) * w.edit.h()};
}

BBox calendar_popup(const WidgetSpec& w) {
    return {w.edit.x(), w.edit.bottom() + 2, 7 * w.calendar.cell_w, 9 * w.calendar.cell_h};
}

namespace {

int first_day_col(const WidgetSpec& w, int year, int month) {
    return ((workflow::weekday({year, month, 1}) - w.calendar.week_start) % 7 + 7) % 7;
}

std::string widget_value(const WidgetSpec& w, const WidgetState& st) {
    if (!is_choice(w.kind)) return st.text;
    std::vector<std::string> chosen;
    for (std::size_t i = 0; i < w.options.size(); ++i)
        if (st.selected[i]) chosen.push_back(w.options[i].text);
    return join(chosen, ";");
}

BBox glyph_box(const BBox& option) { return {option.x() - 26, option.y(), 22, option.h()}; }

struct Painter {
    std::vector<TextRegion> regions;
    void add(const std::string& text, const BBox& box) {
        if (!trim(text).empty()) regions.emplace_back(text, box);
    }
};

void paint_widget(Painter& p, const WidgetSpec& w, const WidgetState& st) {
    p.add(w.label.text(), w.label.box());
    if (w.hint) p.add(w.hint->text(), w.hint->box());
    const double cy = w.edit.center().y;
    switch (w.kind) {
        case FieldKind::Radio:
        case FieldKind::Checkbox:
            for (std::size_t i = 0; i < w.options.size(); ++i) {
                const auto& o = w.options[i];
                const bool on = st.selected[i];
                const char* glyph = w.kind == FieldKind::Radio ? (on ? "(x)" : "( )") : (on ? "[x]" : "[ ]");
                p.add(glyph, glyph_box(*o.box));
                p.add(o.text, *o.box);
            }
            break;
        default: {
            std::string shown = st.text;
            std::replace(shown.begin(), shown.end(), '\n', ' ');
            if (trim(shown).empty() && w.placeholder) shown = *w.placeholder;
            if (trim(shown).empty()) break;
            BBox b = text_at(w.edit.x() + 4, cy, shown);
            if (b.right() > w.edit.right() - 2) b = BBox(b.x(), b.y(), std::max(1.0, w.edit.w() - 6), b.h());
            p.add(shown, b);
        }
    }
}

void paint_dropdown_panel(Painter& p, const WidgetSpec& w, const WidgetState& st) {
    const BBox panel = dropdown_panel(w);
    const int n = static_cast<int>(w.options.size());
    const int rows = std::min(w.window_rows, n);
    for (int i = 0; i < rows; ++i) {
        const int idx = w.wrap ? (st.scroll_offset + i) % n : st.scroll_offset + i;
        if (idx < 0 || idx >= n) continue;
        p.add(w.options[idx].text, text_at(panel.x() + 4, panel.y() + (i + 0.5) * w.edit.h(), w.options[idx].text));
    }
}

void paint_calendar(Painter& p, const WidgetSpec& w, const WidgetState& st) {
    const BBox pop = calendar_popup(w);
    const double cw = w.calendar.cell_w, ch = w.calendar.cell_h;
    auto cell_center = [&](double col, double row) { return Point{pop.x() + (col + 0.5) * cw, pop.y() + (row + 0.5) * ch}; };
    const std::string year = std::to_string(st.cal_year);
    p.add(year, text_centered(cell_center(3, 0), year));
    p.add("<", text_centered(cell_center(0, 1), "<"));
    const std::string month = kMonths[st.cal_month - 1];
    p.add(month, text_centered(cell_center(3, 1), month));
    p.add(">", text_centered(cell_center(6, 1), ">"));
    for (int c = 0; c < 7; ++c) {
        const std::string wd = kWeekdays[(w.calendar.week_start + c) % 7];
        p.add(wd, text_centered(cell_center(c, 2), wd));
    }
    const int first = first_day_col(w, st.cal_year, st.cal_month);
    const int days = workflow::days_in_month(st.cal_year, st.cal_month);
    for (int d = 1; d <= days; ++d) {
        const int index = first + d - 1;
        const std::string t = std::to_string(d);
        p.add(t, text_centered(cell_center(index % 7, 3 + index / 7), t));
    }
}

}  // namespace

RenderedFrame render(const VirtualForm& form, const EnvState& state, const Noise& noise,
                     std::uint64_t frame_id) {
    if (!(noise.rate >= 0 && noise.rate < 1))
        throw Error(ErrorCode::InvalidParameter, "noise rate outside [0,1)");
    const PageSpec& page = form.pages.at(state.page_index - 1);
    const auto& ws = state.widgets.at(state.page_index - 1);

    Painter base;
    if (page.title) base.add(page.title->text(), page.title->box());
    for (std::size_t i = 0; i < page.elements.size(); ++i) paint_widget(base, page.elements[i], ws[i]);
    base.add(page.submit.text, text_centered(page.submit.box.center(), page.submit.text));
    if (state.feedback) base.add(*state.feedback, text_at(page.feedback_box.x(), page.feedback_box.center().y, *state.feedback));

    Painter popup;
    std::optional<BBox> cover;
    if (state.open_dropdown >= 0) {
        const auto& w = page.elements[state.open_dropdown];
        paint_dropdown_panel(popup, w, ws[state.open_dropdown]);
        cover = dropdown_panel(w);
    } else if (state.open_calendar >= 0) {
        const auto& w = page.elements[state.open_calendar];
        paint_calendar(popup, w, ws[state.open_calendar]);
        cover = calendar_popup(w);
    }

    RenderedFrame frame;
    frame.width = form.width;
    frame.height = form.height;
    frame.frame_id = frame_id;
    for (auto& r : base.regions)
        if (!cover || !overlaps(*cover, r.box())) frame.regions.push_back(std::move(r));
    for (auto& r : popup.regions) frame.regions.push_back(std::move(r));

    if (noise.rate > 0) {
        for (auto& r : frame.regions) {
            std::ostringstream key;
            key << r.text() << '@' << r.box().x() << ',' << r.box().y() << ',' << r.box().w() << ','
                << r.box().h();
            std::string t = corrupt(r.text(), noise.rate, fnv1a(key.str(), fnv1a(std::to_string(noise.seed))));
            const double conf = 0.99 - 0.5 * static_cast<double>(edit_distance(r.text(), t)) /
                                           static_cast<double>(r.text().size());
            r = TextRegion(t, r.box(), std::clamp(conf, 0.0, 1.0));
        }
    } else {
        for (auto& r : frame.regions) r = TextRegion(r.text(), r.box(), 0.99);
    }
    sort_reading_order(frame.regions, [](const TextRegion& r) -> const BBox& { return r.box(); });
    return frame;
}

// ---- actions ----

namespace {

void warn(EnvState& s, std::string msg) { s.warnings.push_back(std::move(msg)); }

void close_popups(EnvState& s) {
    s.open_dropdown = -1;
    s.open_calendar = -1;
}

int find_widget(const PageSpec& page, std::string_view name) {
    const std::string norm = normalize_label(name);
    for (std::size_t i = 0; i < page.elements.size(); ++i)
        if (page.elements[i].dom_id == name || normalize_label(page.elements[i].label.text()) == norm)
            return static_cast<int>(i);
    return -1;
}

void submit(const VirtualForm& form, EnvState& s) {
    const PageSpec& page = form.pages[s.page_index - 1];
    const auto& ws = s.widgets[s.page_index - 1];
    std::string missing;
    for (std::size_t i = 0; i < page.elements.size(); ++i)
        if (page.elements[i].required && trim(widget_value(page.elements[i], ws[i])).empty()) {
            missing = page.elements[i].label.text();
            break;
        }

    Effect effect = page.submit.kind == SubmitKind::NextPage ? Effect::Advance : Effect::Finish;
    std::string message = page.submit.kind == SubmitKind::NextPage ? "" : "Form submitted";
    for (const auto& r : page.rules) {
        bool hit = false;
        switch (r.when) {
            case Condition::Always: hit = true; break;
            case Condition::RequiredMissing: hit = !missing.empty(); break;
            case Condition::FieldEquals: {
                const int w = find_widget(page, r.field);
                hit = w >= 0 && widget_value(page.elements[w], ws[w]) == r.value;
                break;
            }
        }
        if (!hit) continue;
        effect = r.effect;
        message = r.message;
        const auto pos = message.find("{field}");
        if (pos != std::string::npos) message.replace(pos, 7, missing);
        break;
    }

    s.focused = -1;
    switch (effect) {
        case Effect::Stay: s.feedback = message; break;
        case Effect::Advance:
            if (s.page_index < static_cast<int>(form.pages.size())) {
                ++s.page_index;
                s.feedback.reset();
                if (!message.empty()) s.feedback = message;
            } else {
                s.finished = true;
                s.feedback = message.empty() ? "Form submitted" : message;
            }
            break;
        case Effect::Finish:
            s.finished = true;
            s.feedback = message.empty() ? "Form submitted" : message;
            break;
    }
}

void click(const VirtualForm& form, EnvState& s, Point p) {
    const PageSpec& page = form.pages[s.page_index - 1];
    auto& ws = s.widgets[s.page_index - 1];

    if (s.open_dropdown >= 0) {
        const auto& w = page.elements[s.open_dropdown];
        auto& st = ws[s.open_dropdown];
        const BBox panel = dropdown_panel(w);
        if (panel.contains(p)) {
            const int n = static_cast<int>(w.options.size());
            const int row = static_cast<int>((p.y - panel.y()) / w.edit.h());
            const int idx = w.wrap ? (st.scroll_offset + row) % n : st.scroll_offset + row;
            if (idx >= 0 && idx < n) st.text = w.options[idx].text;
        }
        close_popups(s);
        return;
    }
    if (s.open_calendar >= 0) {
        const auto& w = page.elements[s.open_calendar];
        auto& st = ws[s.open_calendar];
        const BBox pop = calendar_popup(w);
        if (!pop.contains(p)) {
            close_popups(s);
            return;
        }
        const int row = static_cast<int>((p.y - pop.y()) / w.calendar.cell_h);
        const int col = static_cast<int>((p.x - pop.x()) / w.calendar.cell_w);
        if (row == 1 && (col == 0 || col == 6)) {
            st.cal_month += col == 0 ? -1 : 1;
            if (st.cal_month < 1) {
                st.cal_month = 12;
                --st.cal_year;
            } else if (st.cal_month > 12) {
                st.cal_month = 1;
                ++st.cal_year;
            }
        } else if (row >= 3) {
            const int day = (row - 3) * 7 + col - first_day_col(w, st.cal_year, st.cal_month) + 1;
            if (day >= 1 && day <= workflow::days_in_month(st.cal_year, st.cal_month)) {
                st.text = workflow::format_date({st.cal_year, st.cal_month, day});
                close_popups(s);
            }
        }
        return;
    }

    if (page.submit.box.contains(p)) {
        submit(form, s);
        return;
    }
    for (std::size_t i = 0; i < page.elements.size(); ++i) {
        const auto& w = page.elements[i];
        auto& st = ws[i];
        if (!w.edit.contains(p)) continue;
        s.focused = static_cast<int>(i);
        switch (w.kind) {
            case FieldKind::Dropdown:
                st.scroll_offset = 0;
                s.open_dropdown = static_cast<int>(i);
                break;
            case FieldKind::DatePicker:
                if (!w.calendar.typing_allowed) {
                    try {
                        const auto d = workflow::parse_date(st.text);
                        st.cal_year = d.year;
                        st.cal_month = d.month;
                    } catch (const Error&) {
                    }
                    s.open_calendar = static_cast<int>(i);
                }
                break;
            case FieldKind::Radio:
            case FieldKind::Checkbox:
                for (std::size_t k = 0; k < w.options.size(); ++k) {
                    const BBox& ob = *w.options[k].box;
                    if (!ob.contains(p) && !glyph_box(ob).contains(p)) continue;
                    if (w.kind == FieldKind::Radio) {
                        std::fill(st.selected.begin(), st.selected.end(), false);
                        st.selected[k] = true;
                    } else {
                        st.selected[k] = !st.selected[k];
                    }
                }
                break;
            default: break;
        }
        return;
    }
    s.focused = -1;
    warn(s, "click on dead space");
}

void scroll(const VirtualForm& form, EnvState& s, Point p, int dy) {
    const PageSpec& page = form.pages[s.page_index - 1];
    auto& ws = s.widgets[s.page_index - 1];
    if (dy == 0) return;
    const int dir = dy < 0 ? 1 : -1;
    if (s.open_dropdown >= 0) {
        const auto& w = page.elements[s.open_dropdown];
        auto& st = ws[s.open_dropdown];
        if (!dropdown_panel(w).contains(p)) {
            warn(s, "scroll outside the open dropdown");
            return;
        }
        const int steps = std::max(1, static_cast<int>(std::lround(std::abs(dy) / w.edit.h())));
        const int n = static_cast<int>(w.options.size());
        if (w.wrap) {
            st.scroll_offset = ((st.scroll_offset + dir * steps) % n + n) % n;
        } else {
            const int max_off = std::max(0, n - w.window_rows);
            st.scroll_offset = std::clamp(st.scroll_offset + dir * steps, 0, max_off);
        }
        return;
    }
    if (s.open_calendar >= 0) {
        const auto& w = page.elements[s.open_calendar];
        const BBox pop = calendar_popup(w);
        const BBox year_row(pop.x(), pop.y(), pop.w(), w.calendar.cell_h);
        if (!year_row.contains(p)) {
            warn(s, "scroll outside the calendar year section");
            return;
        }
        const int steps = std::max(1, static_cast<int>(std::lround(std::abs(dy) / 120.0)));
        ws[s.open_calendar].cal_year += dir * steps;
        return;
    }
    warn(s, "scroll with nothing to scroll");
}

}  // namespace

EnvState apply(const VirtualForm& form, EnvState state, const Action& action) {
    if (state.finished) {
        warn(state, "action after the form finished");
        return state;
    }
    const PageSpec& page = form.pages[state.page_index - 1];
    switch (action.op) {
        case Op::Click: click(form, state, action.at); break;
        case Op::TypeText: {
            const int f = state.focused;
            const WidgetSpec* w = f >= 0 ? &page.elements[f] : nullptr;
            if (w && (w->kind == FieldKind::TextInput || w->kind == FieldKind::TextArea ||
                      (w->kind == FieldKind::DatePicker && w->calendar.typing_allowed)))
                state.widgets[state.page_index - 1][f].text = action.text;
            else
                warn(state, "typing with no focused text widget");
            break;
        }
        case Op::PressKey:
            if (action.text == "escape") close_popups(state);
            else if (action.text == "enter" && state.open_dropdown < 0 && state.open_calendar < 0) {
            } else warn(state, "key " + action.text + " ignored");
            break;
        case Op::Scroll: scroll(form, state, action.at, action.delta_y); break;
        case Op::Capture:
        case Op::Wait: break;
    }
    return state;
}

std::map<std::string, std::string> read_filled_values(const VirtualForm& form, const EnvState& state) {
    std::map<std::string, std::string> out;
    for (std::size_t p = 0; p < form.pages.size(); ++p)
        for (std::size_t i = 0; i < form.pages[p].elements.size(); ++i) {
            const auto& w = form.pages[p].elements[i];
            out[w.label.text()] = widget_value(w, state.widgets[p][i]);
        }
    return out;
}

// ---- session ----

Session::Session(VirtualForm form, Noise noise)
    : form_(std::move(form)), noise_(noise), state_(initial_state(form_)) {
    if (!(noise_.rate >= 0 && noise_.rate < 1))
        throw Error(ErrorCode::InvalidParameter, "noise rate outside [0,1)");
}

RenderedFrame Session::capture() { return render(form_, state_, noise_, ++frame_id_); }

void Session::perform(const Action& action) { state_ = apply(form_, std::move(state_), action); }

const PageSpec& Session::page() const { return form_.pages.at(state_.page_index - 1); }

std::vector<BBox> Session::edit_boxes() const {
    std::vector<BBox> out;
    for (const auto& w : page().elements) out.push_back(w.edit);
    return out;
}

void Session::admin_fill(std::string_view label, const std::string& value) {
    const int i = find_widget(page(), label);
    if (i < 0) throw Error(ErrorCode::UnknownField, "no widget labeled " + std::string(label));
    const auto& w = page().elements[i];
    auto& st = state_.widgets[state_.page_index - 1][i];
    if (is_choice(w.kind)) {
        std::fill(st.selected.begin(), st.selected.end(), false);
        for (const auto& part : split(value, ';')) {
            bool found = false;
            for (std::size_t k = 0; k < w.options.size(); ++k)
                if (w.options[k].text == trim(part)) st.selected[k] = found = true;
            if (!found) throw Error(ErrorCode::OptionNotFound, "no option " + part + " in " + std::string(label));
        }
    } else if (w.kind == FieldKind::Dropdown) {
        if (std::none_of(w.options.begin(), w.options.end(), [&](const OptionSpec& o) { return o.text == value; }))
            throw Error(ErrorCode::OptionNotFound, "no option " + value + " in " + std::string(label));
        st.text = value;
    } else {
        st.text = value;
    }
}

void Session::admin_goto_page(int index) {
    if (index < 1 || index > static_cast<int>(form_.pages.size()))
        throw Error(ErrorCode::InvalidParameter, "no page " + std::to_string(index));
    state_.page_index = index;
    state_.focused = state_.open_dropdown = state_.open_calendar = -1;
    state_.feedback.reset();
}

}  // namespace smartflow::sim
