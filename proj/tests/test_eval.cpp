#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <regex>
#include <sstream>
#include <unistd.h>

#include "smartflow/eval.hpp"

using namespace smartflow;
using namespace smartflow::eval;
namespace fs = std::filesystem;

namespace {

const std::string kData = SMARTFLOW_DATA_DIR;
const std::string kPatient = kData + "/apps/patient/top";

// Memoized recursion over (i, j) suffixes; independent of the library's table.
template <typename T>
std::size_t oracle_distance(const std::vector<T>& a, const std::vector<T>& b) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    std::function<std::size_t(std::size_t, std::size_t)> d = [&](std::size_t i, std::size_t j) -> std::size_t {
        if (i == a.size()) return b.size() - j;
        if (j == b.size()) return a.size() - i;
        const auto key = std::make_pair(i, j);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        const std::size_t v = std::min({d(i + 1, j) + 1, d(i, j + 1) + 1, d(i + 1, j + 1) + (a[i] == b[j] ? 0u : 1u)});
        return memo[key] = v;
    };
    return d(0, 0);
}

std::vector<char> chars(const std::string& s) { return {s.begin(), s.end()}; }

std::vector<std::string> words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::string random_string(std::mt19937& rng, std::size_t max_len, std::string_view alphabet) {
    const std::size_t n = rng() % (max_len + 1);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    return s;
}

fs::path copy_bundle(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("smartflow_eval_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(p);
    fs::copy(kPatient, p, fs::copy_options::recursive);
    return p;
}

void rewrite(const fs::path& file, const std::function<std::string(const std::string&)>& edit) {
    const auto text = orch::read_file(file.string());
    std::ofstream(file, std::ios::trunc) << edit(text);
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::InvalidParameter;
}

std::vector<std::string> numbers_in(const std::string& text) {
    static const std::regex num(R"(\d+\.\d{3})");
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), num); it != std::sregex_iterator(); ++it)
        out.push_back(it->str());
    return out;
}

}  // namespace

// ---- error rates ----

TEST_CASE("cer examples") {
    CHECK(cer("hello", "hallo") == 0.2);
    CHECK(cer("ab", "") == 1.0);
    CHECK(cer("same", "same") == 0.0);
    CHECK(cer("ab", "abcd") == 1.0);
    CHECK(code_of([] { cer("", "x"); }) == ErrorCode::UndefinedMetric);
}

TEST_CASE("wer examples") {
    CHECK(wer("first name", "first nane") == 0.5);
    CHECK(wer("first name", "first name") == 0.0);
    CHECK(wer("email", "emall") == 1.0);
    CHECK(wer("a  b\tc", "a b c") == 0.0);
    CHECK(code_of([] { wer("", "x"); }) == ErrorCode::UndefinedMetric);
    CHECK(code_of([] { wer("   ", "x"); }) == ErrorCode::UndefinedMetric);
}

TEST_CASE("cer and wer equal a recursive edit-distance oracle on random pairs") {
    std::mt19937 rng(23);
    for (int i = 0; i < 1000; ++i) {
        std::string a = random_string(rng, 30, "ab cd");
        const std::string b = random_string(rng, 30, "ab cd");
        if (a.empty()) a = "a";
        CAPTURE(a);
        CAPTURE(b);
        CHECK(cer(a, b) == static_cast<double>(oracle_distance(chars(a), chars(b))) / static_cast<double>(a.size()));
        const auto wa = words(a), wb = words(b);
        if (wa.empty()) continue;
        CHECK(wer(a, b) == static_cast<double>(oracle_distance(wa, wb)) / static_cast<double>(wa.size()));
    }
}

TEST_CASE("cer obeys the triangle bound through any intermediate string") {
    std::mt19937 rng(29);
    for (int i = 0; i < 1000; ++i) {
        std::string a = random_string(rng, 20, "xyz");
        if (a.empty()) a = "x";
        const std::string b = random_string(rng, 20, "xyz"), c = random_string(rng, 20, "xyz");
        const double n = static_cast<double>(a.size());
        const double bc = static_cast<double>(oracle_distance(chars(b), chars(c)));
        CHECK(cer(a, c) <= cer(a, b) + bc / n + 1e-12);
    }
}

// ---- loading ----

TEST_CASE("bundled dataset: five applications, at least two layouts each, five tasks per layout") {
    const auto bundles = load_dataset(kData);
    std::map<std::string, int> layouts;
    for (const auto& b : bundles) {
        ++layouts[b.app];
        CHECK_MESSAGE(b.tasks.size() == 5, b.name());
        CHECK(b.truth.size() == b.tasks.size());
        CHECK_FALSE(b.mapping_truth.empty());
    }
    CHECK(layouts.size() == 5);
    for (const auto& [app, n] : layouts) CHECK_MESSAGE(n >= 2, app);
}

TEST_CASE("task CSV naming a field the form lacks is a load error") {
    const auto b = load_layout(kPatient);
    try {
        load_tasks_csv("task_id,Full Name,Shoe Size\nt1,Ada,42\n", b.site.site_id, b.form);
        FAIL("loaded");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LoadError);
        CHECK(std::string(e.what()).find("Shoe Size") != std::string::npos);
    }
    const auto ok = load_tasks_csv("task_id,Full Name\nt1,\"Ada, Countess\"\n", b.site.site_id, b.form);
    REQUIRE(ok.size() == 1);
    CHECK(ok[0].fields.at("Full Name") == "Ada, Countess");
}

TEST_CASE("missing truth file or truth row") {
    const auto dir = copy_bundle("notruth");
    fs::remove(dir / "truth.csv");
    CHECK(code_of([&] { load_layout(dir.string()); }) == ErrorCode::LoadError);
    fs::remove_all(dir);

    const auto dir2 = copy_bundle("shorttruth");
    rewrite(dir2 / "truth.csv", [](const std::string& t) {
        // Drop the last row.
        auto s = t;
        while (!s.empty() && s.back() == '\n') s.pop_back();
        return s.substr(0, s.rfind('\n') + 1);
    });
    CHECK(code_of([&] { load_layout(dir2.string()); }) == ErrorCode::IncompleteTruth);
    fs::remove_all(dir2);
}

TEST_CASE("an extra truth column is ignored with a warning") {
    const auto dir = copy_bundle("extracol");
    rewrite(dir / "truth.csv", [](const std::string& t) {
        std::istringstream in(t);
        std::string out, line;
        bool header = true;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            out += line + (header ? ",Shoe Size\n" : ",42\n");
            header = false;
        }
        return out;
    });
    const auto b = load_layout(dir.string());
    bool warned = false;
    for (const auto& w : b.warnings) warned = warned || w.find("Shoe Size") != std::string::npos;
    CHECK(warned);
    for (const auto& [id, row] : b.truth) CHECK_FALSE(row.fields.count("Shoe Size"));
    fs::remove_all(dir);
}

// ---- reports ----

TEST_CASE("report layout: rows, columns, precision, format agreement") {
    MetricReport r;
    ReportRow a;
    a.layout = "patient/top";
    a.cer = 0.0123;
    a.wer = 0.05;
    a.mapping_rule = 1.0;
    a.mapping_grid = 14.0 / 15.0;
    a.filled = 0.9333333;
    a.submission = 1.0;
    a.minutes = 0.0004;
    a.dropdown = 1.0;
    ReportRow b = a;
    b.layout = "patient/left";
    b.mapping_grid = 1.0;
    b.datepicker = 0.5;
    r.rows = {a, b};

    const auto csv_text = emit_report(r, Format::Csv);
    const auto md = emit_report(r, Format::Markdown);

    std::istringstream in(csv_text);
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] ==
          "Layout No.,Page No.,CER,WER,Rule-based,Virtual-Grid,Filled Data,Request Submission,"
          "Task completion average time (mins),Datepicker,Dropdown,Radio/Checkbox");
    CHECK(lines[3].rfind("Average,", 0) == 0);
    CHECK(csv_text.find("0.933") != std::string::npos);
    CHECK(csv_text.find("0.9333") == std::string::npos);

    CHECK(numbers_in(csv_text) == numbers_in(md));
    CHECK(md.find("| Average |") != std::string::npos);
    CHECK(md.find("| Radio/Checkbox |") != std::string::npos);

    // The average row only averages rows that have the value.
    const auto avg = r.average();
    CHECK(*avg.datepicker == 0.5);
    CHECK_FALSE(avg.choice);
    CHECK(emit_report(r, Format::Csv) == csv_text);
}

TEST_CASE("average row is the column mean within 1e-9") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 100; ++trial) {
        MetricReport r;
        const int n = 1 + static_cast<int>(rng() % 6);
        double sum = 0;
        int have = 0;
        for (int i = 0; i < n; ++i) {
            ReportRow row;
            row.layout = "l" + std::to_string(i);
            row.filled = u(rng);
            if (rng() % 2) {
                row.dropdown = u(rng);
                sum += *row.dropdown;
                ++have;
            }
            r.rows.push_back(row);
        }
        double filled = 0;
        for (const auto& row : r.rows) filled += *row.filled;
        const auto avg = r.average();
        CHECK(std::abs(*avg.filled - filled / n) <= 1e-9);
        if (have) CHECK(std::abs(*avg.dropdown - sum / have) <= 1e-9);
        else CHECK_FALSE(avg.dropdown);
    }
}

// ---- scoring ----

TEST_CASE("a noiseless offline run scores 1.0 everywhere") {
    const std::vector<LayoutBundle> bundles = {load_layout(kPatient)};
    const auto result = run_suite(bundles, {});
    REQUIRE(result.report.rows.size() == 1);
    const auto& row = result.report.rows[0];
    for (const auto& v : {row.mapping_rule, row.mapping_grid, row.filled, row.submission, row.datepicker,
                          row.dropdown, row.choice}) {
        REQUIRE(v);
        CHECK(*v == 1.0);
    }
    CHECK(*row.cer == 0.0);
    CHECK(*row.wer == 0.0);
    CHECK(*row.minutes >= 0.0);
}

TEST_CASE("scoring the same seeded runs twice gives the same report") {
    const std::vector<LayoutBundle> bundles = {load_layout(kPatient), load_layout(kData + "/apps/conference/top")};
    SuiteOptions opt;
    opt.run.noise = {0.02, 4};
    const auto a = run_suite(bundles, opt), b = run_suite(bundles, opt);
    CHECK(emit_report(a.report, Format::Csv) == emit_report(b.report, Format::Csv));
    CHECK(emit_report(a.report, Format::Markdown) == emit_report(b.report, Format::Markdown));
    // Conference has two pages.
    CHECK(a.report.rows.size() == 3);
}

TEST_CASE("a run without a truth row is incomplete truth") {
    auto bundle = load_layout(kPatient);
    const auto result = run_suite({bundle}, {});
    const auto& runs = result.runs.at(bundle.name());
    bundle.truth.erase(bundle.truth.begin());
    CHECK(code_of([&] { score_run(bundle, runs, {}); }) == ErrorCode::IncompleteTruth);
}

TEST_CASE("values_match: trimmed equality, sets ignore order") {
    CHECK(values_match(FieldKind::TextInput, " Ada ", "Ada"));
    CHECK_FALSE(values_match(FieldKind::TextInput, "Ada", "ada"));
    CHECK(values_match(FieldKind::Checkbox, "Fever;Cough", "Cough;Fever"));
    CHECK_FALSE(values_match(FieldKind::Checkbox, "Fever;Cough", "Cough"));
    CHECK_FALSE(values_match(FieldKind::TextInput, "a;b", "b;a"));
}
