#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <json.hpp>

#include "smartflow/eval.hpp"
#include "smartflow/orchestrator.hpp"
#include "smartflow/simulator.hpp"

using namespace smartflow;
using namespace smartflow::sim;
using workflow::Action;
using json = nlohmann::json;

namespace {

const std::string kPatient = std::string(SMARTFLOW_DATA_DIR) + "/apps/patient/top/fixture.json";
const std::string kConference = std::string(SMARTFLOW_DATA_DIR) + "/apps/conference/top/fixture.json";

json patient_json() { return json::parse(orch::read_file(kPatient)); }

const WidgetSpec& widget(const VirtualForm& f, std::string_view label, int page = 1) {
    for (const auto& w : f.pages.at(page - 1).elements)
        if (w.label.text() == label) return w;
    FAIL("no widget " << label);
    throw;
}

void load_error(const json& j, std::string_view mention) {
    try {
        parse_fixture(j.dump());
        FAIL("fixture accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LoadError);
        CHECK(std::string(e.what()).find(mention) != std::string::npos);
    }
}

bool has_text(const RenderedFrame& f, std::string_view text) {
    for (const auto& r : f.regions)
        if (r.text() == text) return true;
    return false;
}

}  // namespace

// ---- fixtures ----

TEST_CASE("patient fixture: one page, at least eight widgets") {
    const auto f = load_fixture(kPatient);
    CHECK(f.pages.size() == 1);
    CHECK(f.pages[0].elements.size() >= 8);
}

TEST_CASE("fixture schema violations name the widget") {
    auto j = patient_json();
    j["pages"][0]["elements"][1]["edit"] = j["pages"][0]["elements"][0]["edit"];
    load_error(j, "dob");

    j = patient_json();
    j["pages"][0].erase("submit");
    load_error(j, "submit");

    j = patient_json();
    j["pages"][0]["elements"][5]["options"] = json::array();
    load_error(j, "blood_group");

    CHECK_THROWS_AS(parse_fixture("{"), Error);
    CHECK_THROWS_AS(load_fixture("/nonexistent/fixture.json"), Error);
}

// ---- noise ----

TEST_CASE("corrupt swaps look-alikes and flips case, nothing else") {
    const std::string text = "hello world 0123 l1 ec !?";
    const auto out = corrupt(text, 0.99, 3);
    REQUIRE(out.size() == text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char a = text[i], b = out[i];
        if (a == b) continue;
        const bool pair = (a == 'o' && b == '0') || (a == '0' && b == 'o') || (a == 'l' && b == '1') ||
                          (a == '1' && b == 'l') || (a == 'e' && b == 'c') || (a == 'c' && b == 'e');
        const bool flip = std::isalpha(static_cast<unsigned char>(a)) &&
                          std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        CHECK_MESSAGE((pair || flip), "changed " << a << " to " << b);
    }
    CHECK(corrupt(text, 0, 3) == text);
    CHECK(corrupt(text, 0.5, 9) == corrupt(text, 0.5, 9));
    CHECK_THROWS_AS(corrupt(text, 1.0, 1), Error);
}

TEST_CASE("render: noiseless text equals fixture text; seeded noise is repeatable") {
    const auto f = load_fixture(kPatient);
    const auto st = initial_state(f);
    const auto clean = render(f, st, {});
    for (const auto& w : f.pages[0].elements) CHECK(has_text(clean, w.label.text()));
    CHECK(render(f, st, {0.05, 7}).regions == render(f, st, {0.05, 7}).regions);
}

TEST_CASE("render: rate 0.05 lands a measured CER in [0.03, 0.07] on a 1000-character page") {
    VirtualForm f;
    f.width = 1600;
    f.height = 1200;
    PageSpec page;
    std::string words = "the quick brown fox jumps over a lazy dog while seven elephants collect loose coins ";
    std::string body;
    while (body.size() < 1000) body += words;
    body.resize(1000);
    // Forty 25-character labels.
    for (int i = 0; i < 40; ++i) {
        WidgetSpec w;
        w.dom_id = "w" + std::to_string(i);
        const std::string line = body.substr(static_cast<std::size_t>(i) * 25, 25);
        w.label = TextRegion(line, BBox(20 + 600.0 * (i / 20), 20 + 56.0 * (i % 20), 200, 16));
        w.edit = BBox(20 + 600.0 * (i / 20), 38 + 56.0 * (i % 20), 300, 24);
        page.elements.push_back(w);
    }
    page.submit.box = BBox(1400, 1150, 80, 32);
    page.feedback_box = BBox(1200, 1100, 300, 24);
    f.pages.push_back(page);

    const auto st = initial_state(f);
    std::string ref, hyp;
    const auto clean = render(f, st, {}), noisy = render(f, st, {0.05, 7});
    REQUIRE(clean.regions.size() == noisy.regions.size());
    for (std::size_t i = 0; i < clean.regions.size(); ++i) {
        ref += clean.regions[i].text() + "\n";
        hyp += noisy.regions[i].text() + "\n";
    }
    CHECK(ref.size() >= 1000);
    const double c = eval::cer(ref, hyp);
    CHECK(c >= 0.03);
    CHECK(c <= 0.07);
}

// ---- actions ----

TEST_CASE("typing into a clicked edit sets its value") {
    Session s(load_fixture(kPatient));
    const auto& w = widget(s.form(), "Full Name");
    s.perform(Action::click(w.edit.center()));
    s.perform(Action::type("John"));
    CHECK(s.filled_values().at("Full Name") == "John");
    CHECK(has_text(s.capture(), "John"));
}

TEST_CASE("typing with nothing focused is a warned no-op") {
    Session s(load_fixture(kPatient));
    s.perform(Action::type("stray"));
    CHECK_FALSE(s.state().warnings.empty());
    for (const auto& [k, v] : s.filled_values()) CHECK(v.empty());
}

TEST_CASE("submit with a required field empty stays with a message") {
    auto j = patient_json();
    j["pages"][0]["feedback_rules"][0]["message"] = "missing mandatory field: {field}";
    Session s(parse_fixture(j.dump()));
    const auto before = s.capture();
    s.perform(Action::click(s.page().submit.box.center()));
    CHECK_FALSE(s.state().finished);
    CHECK(s.state().feedback == std::optional<std::string>("missing mandatory field: Full Name"));
    const auto added = diff_frames(before, s.capture());
    REQUIRE(added.size() == 1);
    CHECK(orch::classify_status(added).category == orch::Category::MissingField);
}

TEST_CASE("submit on a complete final page finishes with the success message") {
    Session s(load_fixture(kPatient));
    for (const auto& w : s.form().pages[0].elements) {
        std::string v = "x";
        if (w.kind == FieldKind::DatePicker) v = "2000-01-01";
        if (!w.options.empty()) v = w.options.front().text;
        s.admin_fill(w.label.text(), v);
    }
    s.perform(Action::click(s.page().submit.box.center()));
    CHECK(s.state().finished);
    CHECK(s.state().feedback == std::optional<std::string>("Patient registered successfully"));
}

TEST_CASE("untouched form reads as empty; checkboxes join in fixture order") {
    Session s(load_fixture(kPatient));
    for (const auto& [k, v] : s.filled_values()) CHECK(v.empty());
    const auto& w = widget(s.form(), "Symptoms");
    s.perform(Action::click(w.options[3].box->center()));
    s.perform(Action::click(w.options[0].box->center()));
    CHECK(s.filled_values().at("Symptoms") == "Fever;Fatigue");
}

// ---- diffs ----

TEST_CASE("diff_frames") {
    Session s(load_fixture(kPatient));
    const auto f0 = s.capture();
    CHECK(diff_frames(f0, f0).empty());
    for (const auto* label : {"Full Name", "Phone Number", "Email Address"}) {
        s.perform(Action::click(widget(s.form(), label).edit.center()));
        s.perform(Action::type(std::string("v-") + label));
    }
    const auto added = diff_frames(f0, s.capture());
    REQUIRE(added.size() == 3);
    CHECK(added[0].text() == "v-Full Name");
    CHECK(added[1].text() == "v-Phone Number");
    CHECK(added[2].text() == "v-Email Address");
}

// ---- invariants ----

TEST_CASE("same actions, same seed: byte-identical frame stream") {
    std::mt19937 rng(4);
    const auto form = load_fixture(kPatient);
    std::vector<Action> script;
    std::uniform_real_distribution<double> x(0, form.width), y(0, form.height);
    for (int i = 0; i < 200; ++i) {
        switch (i % 4) {
            case 0: script.push_back(Action::click({x(rng), y(rng)})); break;
            case 1: script.push_back(Action::type("abc" + std::to_string(i))); break;
            case 2: script.push_back(Action::scroll({x(rng), y(rng)}, i % 8 < 4 ? -28 : 120)); break;
            default: script.push_back(Action::press("escape"));
        }
    }
    auto run = [&] {
        Session s(form, {0.03, 11});
        std::vector<TextRegion> stream;
        for (const auto& a : script) {
            s.perform(a);
            const auto f = s.capture();
            stream.insert(stream.end(), f.regions.begin(), f.regions.end());
        }
        return std::make_pair(stream, s.filled_values());
    };
    CHECK(run() == run());
}

TEST_CASE("an open dropdown eclipses the page beneath") {
    Session s(load_fixture(kPatient));
    const auto& dd = widget(s.form(), "Blood Group");
    s.perform(Action::click(dd.edit.center()));
    REQUIRE(s.state().open_dropdown >= 0);
    const BBox panel = dropdown_panel(dd);
    // The Insurance Provider edit sits under the open panel.
    const auto& below = widget(s.form(), "Insurance Provider");
    REQUIRE(panel.contains(below.edit.center()));
    const auto values = s.filled_values();
    s.perform(Action::click(below.edit.center()));
    CHECK(s.state().open_dropdown == -1);
    CHECK(s.filled_values().at("Insurance Provider").empty());
    CHECK(s.filled_values().at("Blood Group") != values.at("Blood Group"));
}

TEST_CASE("pages never go back and finishing is absorbing") {
    Session s(load_fixture(kConference));
    const auto& form = s.form();
    REQUIRE(form.pages.size() == 2);
    for (const auto& w : form.pages[0].elements)
        s.admin_fill(w.label.text(), w.kind == FieldKind::DatePicker ? "2024-05-01"
                                     : w.options.empty()              ? "x"
                                                                      : w.options.front().text);
    s.perform(Action::click(s.page().submit.box.center()));
    CHECK(s.state().page_index == 2);
    for (const auto& w : form.pages[1].elements)
        s.admin_fill(w.label.text(), w.kind == FieldKind::DatePicker ? "2024-05-01"
                                     : w.options.empty()              ? "x"
                                                                      : w.options.front().text);
    s.perform(Action::click(s.page().submit.box.center()));
    CHECK(s.state().finished);
    const auto final_state = s.filled_values();
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> x(0, form.width), y(0, form.height);
    for (int i = 0; i < 100; ++i) {
        s.perform(Action::click({x(rng), y(rng)}));
        s.perform(Action::type("zz"));
        CHECK(s.state().page_index == 2);
        CHECK(s.state().finished);
    }
    CHECK(s.filled_values() == final_state);
}
