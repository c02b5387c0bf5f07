#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

#include "smartflow/eval.hpp"
#include "smartflow/orchestrator.hpp"

using namespace smartflow;
using namespace smartflow::orch;
namespace fs = std::filesystem;

namespace {

const std::string kApps = std::string(SMARTFLOW_DATA_DIR) + "/apps";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("smartflow_orch_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<TextRegion> regions(std::initializer_list<const char*> texts) {
    std::vector<TextRegion> out;
    double y = 10;
    for (const auto* t : texts) {
        out.emplace_back(t, BBox(10, y, 200, 16));
        y += 20;
    }
    return out;
}

Runner runner_for(const eval::LayoutBundle& b) {
    return Runner(b.site, RunOptions{}, std::make_shared<StepClock>());
}

const workflow::TaskRequest& task(const eval::LayoutBundle& b, std::size_t i) { return b.tasks.at(i); }

void write_task(const fs::path& dir, const std::string& file, const workflow::TaskRequest& r) {
    std::ofstream(dir / file) << workflow::to_json(r);
}

std::vector<std::string> names_in(const fs::path& dir) {
    std::vector<std::string> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) out.push_back(e.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

// ---- configuration ----

TEST_CASE("toml subset") {
    const auto t = parse_toml(
        "# comment\n"
        "site_id = \"a\"  # trailing\n"
        "n = 42\n"
        "x = 2.5\n"
        "on = true\n"
        "pages = [\"p1.html\", \"p2.html\"]\n"
        "\n"
        "[endpoint]\n"
        "url = \"http://h/#x\"\n");
    CHECK(std::get<std::string>(t.at("site_id")) == "a");
    CHECK(std::get<std::int64_t>(t.at("n")) == 42);
    CHECK(std::get<double>(t.at("x")) == 2.5);
    CHECK(std::get<bool>(t.at("on")));
    CHECK(std::get<std::vector<std::string>>(t.at("pages")) == std::vector<std::string>{"p1.html", "p2.html"});
    CHECK(std::get<std::string>(t.at("endpoint.url")) == "http://h/#x");

    for (const char* bad : {"key\n", "k = \"open\n", "k = [1, \"a\"\n", "[table\n", "a = 1\na = 2\n"}) {
        CAPTURE(bad);
        try {
            parse_toml(bad);
            FAIL("accepted");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Configuration);
        }
    }
}

TEST_CASE("site files resolve paths and reject bad strategies") {
    const auto site = load_site(kApps + "/patient/top/site.toml");
    CHECK(site.site_id == "patient-top");
    CHECK(site.mapping_source == MappingSource::RuleBased);
    REQUIRE(site.page_html_paths.size() == 1);
    CHECK(fs::exists(site.page_html_paths[0]));
    CHECK(fs::exists(site.fixture_path));

    const std::string base = kApps + "/patient/top";
    CHECK_THROWS_AS(parse_site("site_id = \"s\"\nurl = \"u\"\npages = []\nfixture = \"fixture.json\"\n", base), Error);
    CHECK_THROWS_AS(parse_site("site_id = \"s\"\nurl = \"u\"\npages = [\"page1.html\"]\nfixture = "
                               "\"fixture.json\"\nmapping_source = \"magic\"\n",
                               base),
                    Error);
    CHECK_THROWS_AS(parse_site("site_id = \"s\"\nurl = \"u\"\npages = [\"page1.html\"]\nfixture = "
                               "\"fixture.json\"\nmapping_source = \"admin\"\nadmin_file = \"nope.json\"\n",
                               base),
                    Error);
    CHECK(mapping_source_from_string("grid") == MappingSource::VirtualGrid);
    CHECK(mapping_source_from_string("demo") == MappingSource::Demonstration);
}

// ---- classification ----

TEST_CASE("classify_status examples") {
    const auto ok = classify_status(regions({"Patient registered successfully"}));
    CHECK(ok.outcome == Outcome::Success);
    CHECK(ok.message == "Patient registered successfully");

    const auto miss = classify_status(regions({"Error: missing mandatory field: Email"}));
    CHECK(miss.outcome == Outcome::Error);
    CHECK(miss.category == Category::MissingField);

    const auto net = classify_status(regions({"Connection lost, try later"}));
    CHECK(net.outcome == Outcome::Error);
    CHECK(net.category == Category::Network);

    const auto none = classify_status({});
    CHECK(none.outcome == Outcome::Failure);
    CHECK(none.message == "no feedback detected");

    const auto other = classify_status(regions({"Please", "wait"}));
    CHECK(other.outcome == Outcome::Failure);
    CHECK(other.message == "Please wait");
}

TEST_CASE("classification survives OCR look-alikes") {
    CHECK(classify_status(regions({"Patient registered succ3ssfu11y"})).outcome != Outcome::Error);
    CHECK(classify_status(regions({"Patient rcgistcrcd succcssfu1ly"})).outcome == Outcome::Success);
    CHECK(classify_status(regions({"Thank y0u"})).outcome == Outcome::Success);
}

TEST_CASE("classify_status is total; success always carries a message") {
    std::mt19937 rng(5);
    const std::vector<std::string> words = {"thank", "you", "missing", "network", "field", "ok", "done", "submitted",
                                            "timeout", "REQUIRED", "x"};
    for (int i = 0; i < 500; ++i) {
        std::vector<TextRegion> rs;
        const int n = static_cast<int>(rng() % 4);
        for (int k = 0; k < n; ++k) rs.emplace_back(words[rng() % words.size()], BBox(0, 20.0 * k, 50, 16));
        const auto c = classify_status(rs);
        if (c.outcome == Outcome::Success) CHECK(!c.message.empty());
        if (c.outcome == Outcome::Error) CHECK(c.category != Category::None);
        else CHECK(c.category == Category::None);
    }
}

TEST_CASE("error codes fall into status categories") {
    CHECK(category_of(ErrorCode::OptionNotFound) == Category::WidgetFailure);
    CHECK(category_of(ErrorCode::NavigationTimeout) == Category::WidgetFailure);
    CHECK(category_of(ErrorCode::ProviderUnavailable) == Category::Network);
    CHECK(category_of(ErrorCode::CassetteMiss) == Category::Network);
    CHECK(category_of(ErrorCode::UnknownField) == Category::MissingField);
    CHECK(category_of(ErrorCode::HtmlParse) == Category::Unknown);
}

TEST_CASE("status JSON round trip") {
    TaskStatus s{"t-9", Outcome::Error, Category::Network, "timeout \"x\"", 1234, "2024-01-01T00:00:00Z"};
    const auto back = TaskStatus::from_json(s.to_json());
    CHECK(back.task_id == s.task_id);
    CHECK(back.outcome == s.outcome);
    CHECK(back.category == s.category);
    CHECK(back.message == s.message);
    CHECK(back.elapsed_ms == s.elapsed_ms);
    CHECK(back.finished_at == s.finished_at);
    CHECK(Clock::timestamp(0) == "1970-01-01T00:00:00.000Z");
}

// ---- validation ----

TEST_CASE("validate_request") {
    const auto b = eval::load_layout(kApps + "/patient/top");
    auto r = runner_for(b);
    const auto decls = r.all_decls();

    auto req = task(b, 0);
    CHECK(validate_request(req, b.site, decls).accepted);

    auto missing = req;
    missing.fields.erase("Date of Birth");
    const auto v = validate_request(missing, b.site, decls);
    CHECK_FALSE(v.accepted);
    CHECK(v.missing == std::vector<std::string>{"Date of Birth"});

    auto blank = req;
    blank.fields["Full Name"] = "   ";
    CHECK(validate_request(blank, b.site, decls).missing == std::vector<std::string>{"Full Name"});

    auto extra = req;
    extra.fields["Favourite Colour"] = "teal";
    const auto w = validate_request(extra, b.site, decls);
    CHECK(w.accepted);
    REQUIRE(w.warnings.size() == 1);
    CHECK(w.warnings[0].find("Favourite Colour") != std::string::npos);

    auto other = req;
    other.site_id = "elsewhere";
    try {
        validate_request(other, b.site, decls);
        FAIL("accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Configuration);
    }
}

// ---- running ----

TEST_CASE("run_task: a valid patient task succeeds with the fixture's message") {
    const auto b = eval::load_layout(kApps + "/patient/top");
    auto r = runner_for(b);
    const auto run = r.run_task(task(b, 0));
    CHECK(run.status.outcome == Outcome::Success);
    CHECK(run.status.message == "Patient registered successfully");
    CHECK(run.status.elapsed_ms >= 0);
    for (const auto& [field, value] : task(b, 0).fields) {
        const auto kind = [&] {
            for (const auto& w : b.form.pages[0].elements)
                if (w.label.text() == field) return w.kind;
            return FieldKind::TextInput;
        }();
        CHECK_MESSAGE(eval::values_match(kind, value, run.filled.at(field)), field);
    }
}

TEST_CASE("run_task: an absent dropdown value is a widget failure, not a crash") {
    const auto b = eval::load_layout(kApps + "/patient/top");
    auto r = runner_for(b);
    auto req = task(b, 0);
    req.fields["Blood Group"] = "Purple Negative";
    const auto run = r.run_task(req);
    CHECK(run.status.outcome == Outcome::Error);
    CHECK(run.status.category == Category::WidgetFailure);
}

TEST_CASE("run_task: two-page conference task fills both pages, one success") {
    const auto b = eval::load_layout(kApps + "/conference/top");
    REQUIRE(b.form.pages.size() == 2);
    auto r = runner_for(b);
    const auto run = r.run_task(task(b, 0));
    CHECK(run.status.outcome == Outcome::Success);
    CHECK(run.pages.size() == 2);
    for (const auto& [field, value] : task(b, 0).fields) CHECK_FALSE(run.filled.at(field).empty());
}

TEST_CASE("run_task is reproducible under a step clock and seeded noise") {
    const auto b = eval::load_layout(kApps + "/patient/left");
    RunOptions opt;
    opt.noise = {0.02, 3};
    Runner r1(b.site, opt, std::make_shared<StepClock>()), r2(b.site, opt, std::make_shared<StepClock>());
    const auto a = r1.run_task(task(b, 1)), c = r2.run_task(task(b, 1));
    CHECK(a.status.to_json() == c.status.to_json());
    CHECK(a.frame_digest == c.frame_digest);
    CHECK(a.filled == c.filled);
}

// ---- queue ----

TEST_CASE("queue: FIFO by filename, one status each, finished_at non-decreasing") {
    const auto b = eval::load_layout(kApps + "/patient/top");
    auto r = runner_for(b);
    const auto dir = scratch("fifo");
    const auto in = dir / "in", out = dir / "out";
    fs::create_directories(in);
    // Written out of order on purpose.
    write_task(in, "c.json", task(b, 2));
    write_task(in, "a.json", task(b, 0));
    write_task(in, "b.json", task(b, 1));

    std::vector<std::string> order;
    const auto sum = process_queue(in.string(), out.string(), r, [&](std::string_view stage, std::string_view f) {
        if (stage == "read") order.emplace_back(f);
    });
    CHECK(order == std::vector<std::string>{"a.json", "b.json", "c.json"});
    CHECK(sum.processed == 3);
    CHECK(sum.succeeded == 3);
    CHECK(names_in(out) == std::vector<std::string>{"a.json", "b.json", "c.json"});
    CHECK(names_in(in).empty());
    CHECK(names_in(in / "done").size() == 3);

    std::string prev;
    for (const auto& f : {"a.json", "b.json", "c.json"}) {
        const auto st = TaskStatus::from_json(read_file((out / f).string()));
        CHECK(st.finished_at >= prev);
        prev = st.finished_at;
    }
    fs::remove_all(dir);
}

TEST_CASE("queue: a restart only processes what is left") {
    const auto b = eval::load_layout(kApps + "/patient/top");
    auto r = runner_for(b);
    const auto dir = scratch("restart");
    const auto in = dir / "in", out = dir / "out";
    fs::create_directories(in);
    for (std::size_t i = 0; i < 3; ++i) write_task(in, "t" + std::to_string(i) + ".json", task(b, i));

    struct Crash {};
    try {
        process_queue(in.string(), out.string(), r, [](std::string_view stage, std::string_view f) {
            if (stage == "read" && f == "t2.json") throw Crash{};
        });
        FAIL("no crash");
    } catch (const Crash&) {
    }
    CHECK(names_in(out).size() == 2);

    std::vector<std::string> ran;
    const auto sum = process_queue(in.string(), out.string(), r, [&](std::string_view stage, std::string_view f) {
        if (stage == "read") ran.emplace_back(f);
    });
    CHECK(ran == std::vector<std::string>{"t2.json"});
    CHECK(sum.processed == 1);
    CHECK(names_in(out).size() == 3);

    // Nothing left: a third pass does nothing.
    CHECK(process_queue(in.string(), out.string(), r).processed == 0);
    fs::remove_all(dir);
}

TEST_CASE("queue: crash between status write and move is finished on restart, not rerun") {
    const auto b = eval::load_layout(kApps + "/patient/top");
    auto r = runner_for(b);
    const auto dir = scratch("midmove");
    const auto in = dir / "in", out = dir / "out";
    fs::create_directories(in);
    write_task(in, "t.json", task(b, 0));
    struct Crash {};
    CHECK_THROWS_AS(process_queue(in.string(), out.string(), r,
                                  [](std::string_view stage, std::string_view) {
                                      if (stage == "status-written") throw Crash{};
                                  }),
                    Crash);
    const auto first = read_file((out / "t.json").string());
    const auto sum = process_queue(in.string(), out.string(), r);
    CHECK(sum.processed == 0);
    CHECK(sum.skipped == 1);
    CHECK(read_file((out / "t.json").string()) == first);
    CHECK(names_in(in / "done") == std::vector<std::string>{"t.json"});
    fs::remove_all(dir);
}

TEST_CASE("queue: malformed task file gives an Unknown error and moves to failed/") {
    const auto b = eval::load_layout(kApps + "/patient/top");
    auto r = runner_for(b);
    const auto dir = scratch("broken");
    const auto in = dir / "in", out = dir / "out";
    fs::create_directories(in);
    std::ofstream(in / "bad.json") << "{\"task_id\": ";
    const auto sum = process_queue(in.string(), out.string(), r);
    CHECK(sum.errors == 1);
    const auto st = TaskStatus::from_json(read_file((out / "bad.json").string()));
    CHECK(st.outcome == Outcome::Error);
    CHECK(st.category == Category::Unknown);
    CHECK(names_in(in / "failed") == std::vector<std::string>{"bad.json"});
    fs::remove_all(dir);
}

TEST_CASE("queue: rejected requests get a status naming the missing field") {
    const auto b = eval::load_layout(kApps + "/patient/top");
    auto r = runner_for(b);
    const auto dir = scratch("reject");
    const auto in = dir / "in", out = dir / "out";
    fs::create_directories(in);
    auto req = task(b, 0);
    req.fields.erase("Phone Number");
    write_task(in, "r.json", req);
    const auto sum = process_queue(in.string(), out.string(), r);
    CHECK(sum.rejected == 1);
    const auto st = TaskStatus::from_json(read_file((out / "r.json").string()));
    CHECK(st.outcome == Outcome::Error);
    CHECK(st.category == Category::MissingField);
    CHECK(st.message.find("Phone Number") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("atomic writes replace content and leave no temp files") {
    const auto dir = scratch("atomic");
    const auto p = (dir / "s.json").string();
    write_file_atomic(p, "one");
    write_file_atomic(p, "two");
    CHECK(read_file(p) == "two");
    CHECK(names_in(dir) == std::vector<std::string>{"s.json"});
    CHECK_THROWS_AS(read_file((dir / "none").string()), Error);
    fs::remove_all(dir);
}
