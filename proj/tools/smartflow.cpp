// Command-line front end: site registry, mapping review, queue runs, scoring.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "smartflow/csv.hpp"
#include "smartflow/eval.hpp"
#include "smartflow/orchestrator.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace smartflow;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 2;
constexpr int kConfig = 3;

std::string default_registry() {
    if (const char* env = std::getenv("SMARTFLOW_REGISTRY")) return env;
    return ".smartflow/sites.json";
}

json read_registry(const std::string& path) {
    if (!fs::exists(path)) return json::object();
    try {
        return json::parse(orch::read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Configuration, "corrupt registry " + path + ": " + e.what());
    }
}

orch::SiteMetadata lookup_site(const std::string& registry, const std::string& site) {
    // A path to a site file works as well as a registered id.
    if (fs::exists(site) && fs::is_regular_file(site)) return orch::load_site(site);
    const auto reg = read_registry(registry);
    if (!reg.contains(site))
        throw Error(ErrorCode::Configuration, "unknown site '" + site + "' (run `smartflow init <site.toml>`)");
    return orch::load_site(reg[site].get<std::string>());
}

struct ProviderArgs {
    std::string kind = "offline";
    std::string cassette;
    std::string url;
    std::string token_env = "SMARTFLOW_API_TOKEN";
    std::string model;
    int timeout_ms = 30000;

    llm::ProviderConfig config() const {
        llm::ProviderConfig c;
        c.kind = llm::provider_kind_from_string(kind);
        if (!cassette.empty()) c.cassette_path = cassette;
        if (c.kind == llm::ProviderKind::Replay && cassette.empty())
            throw Error(ErrorCode::Configuration, "replay needs --cassette");
        if (c.kind == llm::ProviderKind::Remote) {
            if (url.empty()) throw Error(ErrorCode::Configuration, "remote needs --endpoint");
            llm::Endpoint e;
            e.url = url;
            e.token_env = token_env;
            e.model = model;
            e.timeout_ms = timeout_ms;
            c.endpoint = e;
        }
        return c;
    }

    void add(CLI::App* cmd) {
        cmd->add_option("--provider", kind, "offline, replay or remote")
            ->check(CLI::IsMember({"offline", "replay", "remote"}));
        cmd->add_option("--cassette", cassette, "Cassette file (replay reads, others record)");
        cmd->add_option("--endpoint", url, "Completion endpoint URL for remote");
        cmd->add_option("--token-env", token_env, "Environment variable holding the API token");
        cmd->add_option("--model", model, "Model name sent to the endpoint");
        cmd->add_option("--timeout-ms", timeout_ms, "Per-request timeout");
    }
};

struct NoiseArgs {
    double rate = 0;
    std::uint64_t seed = 0;
    void add(CLI::App* cmd) {
        cmd->add_option("--noise", rate, "OCR character noise rate in [0,1)")->check(CLI::Range(0.0, 0.999));
        cmd->add_option("--seed", seed, "Noise seed");
    }
    sim::Noise noise() const { return {rate, seed}; }
};

eval::Format format_of(const std::string& f) { return f == "csv" ? eval::Format::Csv : eval::Format::Markdown; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Form-filling automation over simulated screens"};
    app.require_subcommand(1);
    std::string registry = default_registry();
    app.add_option("--registry", registry, "Site registry file");

    // init
    auto* init = app.add_subcommand("init", "Register a site from its TOML file");
    std::string site_file;
    init->add_option("site_toml", site_file)->required();

    // map
    auto* map = app.add_subcommand("map", "Compute and print the mapping list of every page");
    std::string map_site, strategy, override_file, save_file;
    bool review = false;
    NoiseArgs map_noise;
    ProviderArgs map_provider;
    map->add_option("site", map_site)->required();
    map->add_option("--strategy", strategy, "rule, grid or demo (default: the site's)")
        ->check(CLI::IsMember({"rule", "grid", "demo", "admin"}));
    map->add_flag("--review", review, "Print a review table instead of JSON");
    map->add_option("--override", override_file, "Mapping JSON whose entries replace computed ones by name");
    map->add_option("--save", save_file, "Write the final mapping as an admin file");
    map_noise.add(map);
    map_provider.add(map);

    // run
    auto* run = app.add_subcommand("run", "Process the task queue of a site");
    std::string run_site, in_dir, out_dir, run_strategy;
    NoiseArgs run_noise;
    ProviderArgs run_provider;
    run->add_option("site", run_site)->required();
    run->add_option("--in", in_dir, "Incoming task directory")->required();
    run->add_option("--out", out_dir, "Status directory")->required();
    run->add_option("--strategy", run_strategy)->check(CLI::IsMember({"rule", "grid", "demo", "admin"}));
    run_noise.add(run);
    run_provider.add(run);

    // eval
    auto* ev = app.add_subcommand("eval", "Run a site's tasks and score them against truth");
    std::string ev_site, tasks_csv, truth_csv, ev_format = "markdown";
    NoiseArgs ev_noise;
    ProviderArgs ev_provider;
    ev->add_option("site", ev_site)->required();
    ev->add_option("--tasks", tasks_csv)->required();
    ev->add_option("--truth", truth_csv)->required();
    ev->add_option("--format", ev_format)->check(CLI::IsMember({"markdown", "csv"}));
    ev_noise.add(ev);
    ev_provider.add(ev);

    // suite
    auto* suite = app.add_subcommand("suite", "Run and score the whole bundled dataset");
    std::string data_dir = "data", suite_format = "markdown";
    NoiseArgs suite_noise;
    suite->add_option("--data", data_dir, "Dataset root holding apps/");
    suite->add_option("--format", suite_format)->check(CLI::IsMember({"markdown", "csv"}));
    suite_noise.add(suite);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*init) {
            const auto site = orch::load_site(site_file);
            auto reg = read_registry(registry);
            reg[site.site_id] = fs::absolute(site_file).lexically_normal().string();
            if (fs::path(registry).has_parent_path()) fs::create_directories(fs::path(registry).parent_path());
            orch::write_file_atomic(registry, reg.dump(2) + "\n");
            std::cout << "registered " << site.site_id << "\n";
            return kOk;
        }

        if (*map) {
            const auto site = lookup_site(registry, map_site);
            orch::RunOptions opt;
            if (!strategy.empty()) opt.strategy = orch::mapping_source_from_string(strategy);
            opt.noise = map_noise.noise();
            opt.provider = map_provider.config();
            orch::Runner runner(site, opt);
            const auto chosen = opt.strategy.value_or(site.mapping_source);
            std::vector<layout::MappingList> overrides;
            if (!override_file.empty()) {
                const auto j = json::parse(orch::read_file(override_file));
                if (j.is_object() && j.contains("pages"))
                    for (const auto& p : j["pages"]) overrides.push_back(layout::mapping_from_json(p.dump()));
                else
                    overrides.push_back(layout::mapping_from_json(j.dump()));
            }
            json pages = json::array();
            for (std::size_t k = 1; k <= runner.form().pages.size(); ++k) {
                auto state = sim::initial_state(runner.form());
                state.page_index = static_cast<int>(k);
                const auto frame = sim::render(runner.form(), state, opt.noise);
                std::vector<BBox> edits;
                for (const auto& w : runner.form().pages[k - 1].elements) edits.push_back(w.edit);
                auto list = runner.map_page(frame, edits, static_cast<int>(k), chosen);
                if (k <= overrides.size())
                    for (const auto& o : overrides[k - 1].entries) {
                        bool replaced = false;
                        for (auto& e : list.entries)
                            if (normalize_label(e.field_name) == normalize_label(o.field_name)) {
                                e = o;
                                e.source = layout::Source::AdminOverride;
                                replaced = true;
                            }
                        if (!replaced) {
                            list.entries.push_back(o);
                            list.entries.back().source = layout::Source::AdminOverride;
                        }
                    }
                if (review) {
                    std::cout << "page " << k << "\n" << layout::review_table(list);
                    for (const auto& w : list.warnings) std::cout << "warning: " << w << "\n";
                } else {
                    std::cout << layout::to_json(list) << "\n";
                }
                pages.push_back(json::parse(layout::to_json(list)));
            }
            if (!save_file.empty()) orch::write_file_atomic(save_file, json{{"pages", pages}}.dump(2) + "\n");
            return kOk;
        }

        if (*run) {
            const auto site = lookup_site(registry, run_site);
            orch::RunOptions opt;
            if (!run_strategy.empty()) opt.strategy = orch::mapping_source_from_string(run_strategy);
            opt.noise = run_noise.noise();
            opt.provider = run_provider.config();
            orch::Runner runner(site, opt);
            const auto s = orch::process_queue(in_dir, out_dir, runner);
            std::cout << "processed " << s.processed << ": " << s.succeeded << " succeeded, " << s.failed
                      << " failed, " << s.errors << " errors (" << s.rejected << " rejected), " << s.skipped
                      << " already done\n";
            if (s.config_errors > 0) return kConfig;
            return (s.failed + s.errors) > 0 ? kFailed : kOk;
        }

        if (*ev) {
            const auto site = lookup_site(registry, ev_site);
            eval::LayoutBundle b;
            b.site = site;
            b.layout = site.site_id;
            b.form = sim::load_fixture(site.fixture_path);
            b.tasks = eval::load_tasks_csv(orch::read_file(tasks_csv), site.site_id, b.form);
            b.truth = eval::load_truth_csv(orch::read_file(truth_csv), b.form, &b.warnings);
            const auto mt = fs::path(site.fixture_path).parent_path() / "mapping_truth.csv";
            if (fs::exists(mt)) {
                const auto t = csv::parse_table(orch::read_file(mt.string()));
                for (const auto& row : t.rows) b.mapping_truth[row.at(0)] = row.at(1);
            } else {
                for (const auto& p : b.form.pages)
                    for (const auto& w : p.elements) b.mapping_truth[w.label.text()] = w.dom_id;
            }
            for (const auto& w : b.warnings) std::cerr << "warning: " << w << "\n";
            orch::RunOptions opt;
            opt.noise = ev_noise.noise();
            opt.provider = ev_provider.config();
            eval::SuiteOptions so{opt, std::make_shared<orch::SystemClock>()};
            const auto r = eval::run_suite({b}, so);
            std::cout << eval::emit_report(r.report, format_of(ev_format));
            for (const auto& [id, art] : r.runs.begin()->second)
                if (art.status.outcome != b.truth.at(id).expected) return kFailed;
            return kOk;
        }

        if (*suite) {
            const auto bundles = eval::load_dataset(data_dir);
            orch::RunOptions opt;
            opt.noise = suite_noise.noise();
            eval::SuiteOptions so{opt, std::make_shared<orch::SystemClock>()};
            const auto r = eval::run_suite(bundles, so);
            std::cout << eval::emit_report(r.report, format_of(suite_format));
            return kOk;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
        if (!e.detail().empty()) std::cerr << "  detail: " << e.detail() << "\n";
        const bool config = e.code() == ErrorCode::Configuration || e.code() == ErrorCode::LoadError ||
                            e.code() == ErrorCode::IncompleteTruth;
        return config ? kConfig : kFailed;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    }
    return kOk;
}
