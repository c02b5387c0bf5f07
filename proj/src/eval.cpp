#include "smartflow/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "smartflow/csv.hpp"

namespace fs = std::filesystem;

namespace smartflow::eval {

namespace {

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

}  // namespace

double cer(std::string_view reference, std::string_view hypothesis) {
    if (reference.empty()) throw Error(ErrorCode::UndefinedMetric, "cer needs a non-empty reference");
    return static_cast<double>(edit_distance(reference, hypothesis)) / static_cast<double>(reference.size());
}

double wer(std::string_view reference, std::string_view hypothesis) {
    const auto ref = words(reference);
    if (ref.empty()) throw Error(ErrorCode::UndefinedMetric, "wer needs at least one reference word");
    return static_cast<double>(edit_distance(ref, words(hypothesis))) / static_cast<double>(ref.size());
}

bool values_match(FieldKind kind, std::string_view expected, std::string_view actual) {
    if (kind != FieldKind::Checkbox) return trim(expected) == trim(actual);
    auto as_set = [](std::string_view s) {
        std::set<std::string> out;
        for (const auto& p : split(s, ';'))
            if (!trim(p).empty()) out.insert(trim(p));
        return out;
    };
    return as_set(expected) == as_set(actual);
}

// ---------------------------------------------------------------- loading

namespace {

const sim::WidgetSpec* widget_by_label(const sim::VirtualForm& form, std::string_view label, int* page = nullptr) {
    for (std::size_t p = 0; p < form.pages.size(); ++p)
        for (const auto& w : form.pages[p].elements)
            if (normalize_label(w.label.text()) == normalize_label(label)) {
                if (page) *page = static_cast<int>(p) + 1;
                return &w;
            }
    return nullptr;
}

const sim::WidgetSpec* widget_by_dom_id(const sim::VirtualForm& form, std::string_view id, int* page = nullptr) {
    for (std::size_t p = 0; p < form.pages.size(); ++p)
        for (const auto& w : form.pages[p].elements)
            if (w.dom_id == id) {
                if (page) *page = static_cast<int>(p) + 1;
                return &w;
            }
    return nullptr;
}

std::string must_read(const fs::path& p) {
    if (!fs::exists(p)) throw Error(ErrorCode::LoadError, "missing " + p.string(), p.string());
    return orch::read_file(p.string());
}

}  // namespace

std::vector<workflow::TaskRequest> load_tasks_csv(std::string_view text, const std::string& site_id,
                                                  const sim::VirtualForm& form) {
    const auto t = csv::parse_table(text);
    const int id_col = t.column("task_id");
    if (id_col < 0) throw Error(ErrorCode::LoadError, "tasks CSV lacks a task_id column");
    for (std::size_t c = 0; c < t.header.size(); ++c)
        if (static_cast<int>(c) != id_col && !widget_by_label(form, t.header[c]))
            throw Error(ErrorCode::LoadError, "tasks CSV names unknown field " + t.header[c], t.header[c]);
    std::vector<workflow::TaskRequest> out;
    std::set<std::string> seen;
    for (const auto& row : t.rows) {
        workflow::TaskRequest r;
        r.task_id = trim(row.at(id_col));
        if (r.task_id.empty()) throw Error(ErrorCode::LoadError, "tasks CSV row without task_id");
        if (!seen.insert(r.task_id).second) throw Error(ErrorCode::LoadError, "duplicate task " + r.task_id);
        r.site_id = site_id;
        for (std::size_t c = 0; c < t.header.size() && c < row.size(); ++c)
            if (static_cast<int>(c) != id_col && !trim(row[c]).empty()) r.fields[t.header[c]] = trim(row[c]);
        if (r.fields.empty()) throw Error(ErrorCode::LoadError, "task " + r.task_id + " has no fields");
        out.push_back(std::move(r));
    }
    return out;
}

std::map<std::string, TruthRow> load_truth_csv(std::string_view text, const sim::VirtualForm& form,
                                               std::vector<std::string>* warnings) {
    const auto t = csv::parse_table(text);
    const int id_col = t.column("task_id");
    const int out_col = t.column("expected_outcome");
    if (id_col < 0 || out_col < 0)
        throw Error(ErrorCode::LoadError, "truth CSV needs task_id and expected_outcome columns");
    std::vector<bool> keep(t.header.size(), false);
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (static_cast<int>(c) == id_col || static_cast<int>(c) == out_col) continue;
        keep[c] = widget_by_label(form, t.header[c]) != nullptr;
        if (!keep[c] && warnings) warnings->push_back("truth column ignored: " + t.header[c]);
    }
    std::map<std::string, TruthRow> out;
    for (const auto& row : t.rows) {
        TruthRow r;
        r.task_id = trim(row.at(id_col));
        const auto o = trim(row.at(out_col));
        if (o == "Success") r.expected = orch::Outcome::Success;
        else if (o == "Failure") r.expected = orch::Outcome::Failure;
        else if (o == "Error") r.expected = orch::Outcome::Error;
        else throw Error(ErrorCode::LoadError, "bad expected_outcome '" + o + "' for " + r.task_id);
        for (std::size_t c = 0; c < t.header.size() && c < row.size(); ++c)
            if (keep[c] && !trim(row[c]).empty()) r.fields[t.header[c]] = trim(row[c]);
        out[r.task_id] = std::move(r);
    }
    return out;
}

LayoutBundle load_layout(const std::string& dir) {
    const fs::path d(dir);
    LayoutBundle b;
    b.dir = d.string();
    b.layout = d.filename().string();
    b.app = d.parent_path().filename().string();
    try {
        b.site = orch::load_site((d / "site.toml").string());
    } catch (const Error& e) {
        throw Error(ErrorCode::LoadError, std::string("bad site for ") + b.dir + ": " + e.what());
    }
    b.form = sim::load_fixture((d / "fixture.json").string());
    b.tasks = load_tasks_csv(must_read(d / "tasks.csv"), b.site.site_id, b.form);
    b.truth = load_truth_csv(must_read(d / "truth.csv"), b.form, &b.warnings);
    for (const auto& t : b.tasks)
        if (!b.truth.count(t.task_id))
            throw Error(ErrorCode::IncompleteTruth, "no truth for task " + t.task_id, t.task_id);
    const auto mt = csv::parse_table(must_read(d / "mapping_truth.csv"));
    const int fc = mt.column("field_name"), ic = mt.column("dom_id");
    if (fc < 0 || ic < 0) throw Error(ErrorCode::LoadError, "mapping_truth.csv needs field_name and dom_id");
    for (const auto& row : mt.rows) {
        if (!widget_by_dom_id(b.form, row.at(ic)))
            throw Error(ErrorCode::LoadError, "mapping truth names unknown dom_id " + row.at(ic));
        b.mapping_truth[row.at(fc)] = row.at(ic);
    }
    return b;
}

std::vector<LayoutBundle> load_dataset(const std::string& root) {
    const fs::path apps = fs::path(root) / "apps";
    if (!fs::is_directory(apps)) throw Error(ErrorCode::LoadError, "no apps directory under " + root);
    std::vector<fs::path> dirs;
    for (const auto& a : fs::directory_iterator(apps))
        if (a.is_directory())
            for (const auto& l : fs::directory_iterator(a.path()))
                if (l.is_directory()) dirs.push_back(l.path());
    std::sort(dirs.begin(), dirs.end());
    std::vector<LayoutBundle> out;
    for (const auto& d : dirs) out.push_back(load_layout(d.string()));
    return out;
}

// ---------------------------------------------------------------- report

ReportRow MetricReport::average() const {
    ReportRow avg;
    avg.layout = "Average";
    avg.page = 0;
    using Field = std::optional<double> ReportRow::*;
    for (Field f : {&ReportRow::cer, &ReportRow::wer, &ReportRow::mapping_rule, &ReportRow::mapping_grid,
                    &ReportRow::filled, &ReportRow::submission, &ReportRow::minutes, &ReportRow::datepicker,
                    &ReportRow::dropdown, &ReportRow::choice}) {
        double sum = 0;
        int n = 0;
        for (const auto& r : rows)
            if (r.*f) {
                sum += *(r.*f);
                ++n;
            }
        if (n > 0) avg.*f = sum / n;
    }
    return avg;
}

std::string emit_report(const MetricReport& report, Format format) {
    const std::vector<std::string> header = {"Layout No.",  "Page No.",      "CER",
                                             "WER",         "Rule-based",    "Virtual-Grid",
                                             "Filled Data", "Request Submission",
                                             "Task completion average time (mins)",
                                             "Datepicker",  "Dropdown",      "Radio/Checkbox"};
    auto num = [](const std::optional<double>& v) -> std::string {
        if (!v) return "-";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", *v);
        return buf;
    };
    auto cells = [&](const ReportRow& r, bool avg) {
        return std::vector<std::string>{avg ? "Average" : r.layout,
                                        avg ? "-" : std::to_string(r.page),
                                        num(r.cer),
                                        num(r.wer),
                                        num(r.mapping_rule),
                                        num(r.mapping_grid),
                                        num(r.filled),
                                        num(r.submission),
                                        num(r.minutes),
                                        num(r.datepicker),
                                        num(r.dropdown),
                                        num(r.choice)};
    };
    std::vector<std::vector<std::string>> body;
    for (const auto& r : report.rows) body.push_back(cells(r, false));
    body.push_back(cells(report.average(), true));

    std::string out;
    if (format == Format::Csv) {
        out += csv::format_row(header);
        for (const auto& b : body) out += csv::format_row(b);
        return out;
    }
    auto line = [&](const std::vector<std::string>& c) {
        out += "|";
        for (const auto& x : c) out += " " + x + " |";
        out += "\n";
    };
    line(header);
    out += "|";
    for (std::size_t i = 0; i < header.size(); ++i) out += i < 2 ? " --- |" : " ---: |";
    out += "\n";
    for (const auto& b : body) line(b);
    return out;
}

// ---------------------------------------------------------------- scoring

namespace {

std::string page_text(const RenderedFrame& f) {
    std::vector<std::string> t;
    for (const auto& r : f.regions) t.push_back(r.text());
    return join(t, " ");
}

std::optional<double> ratio(int hit, int total) {
    if (total == 0) return std::nullopt;
    return static_cast<double>(hit) / total;
}

}  // namespace

double page_mapping_accuracy(const LayoutBundle& bundle, int page, orch::MappingSource strategy,
                             const ScoreOptions& options) {
    orch::RunOptions ro;
    ro.strategy = strategy;
    ro.provider = options.provider;
    ro.noise = options.noise;
    orch::Runner runner(bundle.site, ro, std::make_shared<orch::StepClock>());
    auto state = sim::initial_state(bundle.form);
    state.page_index = page;
    const auto frame = sim::render(bundle.form, state, options.noise);
    std::vector<BBox> edits;
    for (const auto& w : bundle.form.pages.at(page - 1).elements) edits.push_back(w.edit);
    const auto raw = runner.raw_mapping(frame, edits, page, strategy);
    std::map<std::string, BBox> truth;
    for (const auto& [field, id] : bundle.mapping_truth) {
        int p = 0;
        const auto* w = widget_by_dom_id(bundle.form, id, &p);
        if (w && p == page) truth[field] = w->edit;
    }
    return layout::mapping_accuracy(raw.entries, truth);
}

std::vector<ReportRow> score_run(const LayoutBundle& bundle, const std::map<std::string, orch::RunArtifacts>& runs,
                                 const ScoreOptions& options) {
    for (const auto& [id, _] : runs)
        if (!bundle.truth.count(id)) throw Error(ErrorCode::IncompleteTruth, "no truth for task " + id, id);

    int sub_hit = 0;
    double elapsed = 0;
    for (const auto& [id, run] : runs) {
        if (run.status.outcome == bundle.truth.at(id).expected) ++sub_hit;
        elapsed += static_cast<double>(run.status.elapsed_ms);
    }

    std::vector<ReportRow> rows;
    for (std::size_t p = 1; p <= bundle.form.pages.size(); ++p) {
        const int page = static_cast<int>(p);
        ReportRow row;
        row.layout = bundle.name();
        row.page = page;

        auto state = sim::initial_state(bundle.form);
        state.page_index = page;
        const auto ref = page_text(sim::render(bundle.form, state, {}));
        const auto hyp = page_text(sim::render(bundle.form, state, options.noise));
        row.cer = cer(ref, hyp);
        row.wer = wer(ref, hyp);
        row.mapping_rule = page_mapping_accuracy(bundle, page, orch::MappingSource::RuleBased, options);
        row.mapping_grid = page_mapping_accuracy(bundle, page, orch::MappingSource::VirtualGrid, options);

        int fill_hit = 0, fill_n = 0, dp_hit = 0, dp_n = 0, dd_hit = 0, dd_n = 0, ch_hit = 0, ch_n = 0;
        for (const auto& [id, run] : runs) {
            for (const auto& [label, expected] : bundle.truth.at(id).fields) {
                int wp = 0;
                const auto* w = widget_by_label(bundle.form, label, &wp);
                if (!w || wp != page) continue;
                const auto it = run.filled.find(w->label.text());
                const bool ok = it != run.filled.end() && values_match(w->kind, expected, it->second);
                ++fill_n;
                fill_hit += ok;
                if (w->kind == FieldKind::DatePicker) ++dp_n, dp_hit += ok;
                if (w->kind == FieldKind::Dropdown) ++dd_n, dd_hit += ok;
                if (is_choice(w->kind)) ++ch_n, ch_hit += ok;
            }
        }
        row.filled = ratio(fill_hit, fill_n);
        row.datepicker = ratio(dp_hit, dp_n);
        row.dropdown = ratio(dd_hit, dd_n);
        row.choice = ratio(ch_hit, ch_n);
        row.submission = ratio(sub_hit, static_cast<int>(runs.size()));
        if (!runs.empty()) row.minutes = elapsed / static_cast<double>(runs.size()) / 60000.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

SuiteResult run_suite(const std::vector<LayoutBundle>& bundles, const SuiteOptions& options) {
    SuiteResult out;
    ScoreOptions so{options.run.noise, options.run.provider};
    for (const auto& b : bundles) {
        auto clock = options.clock ? options.clock : std::make_shared<orch::StepClock>();
        orch::Runner runner(b.site, options.run, clock);
        auto& runs = out.runs[b.name()];
        for (const auto& t : b.tasks) runs[t.task_id] = runner.run_task(t);
        const auto rows = score_run(b, runs, so);
        out.report.rows.insert(out.report.rows.end(), rows.begin(), rows.end());
    }
    return out;
}

}  // namespace smartflow::eval
