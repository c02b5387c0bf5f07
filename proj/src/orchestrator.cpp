#include "smartflow/orchestrator.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace smartflow::orch {

// ---------------------------------------------------------------- files

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Persistence, "cannot read " + path, path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

void fsync_path(const std::string& path, int flags) {
    const int fd = ::open(path.c_str(), flags);
    if (fd < 0) return;
    ::fsync(fd);
    ::close(fd);
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    const fs::path target(path);
    const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp");
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd < 0) throw Error(ErrorCode::Persistence, "cannot create " + tmp.string() + ": " + std::strerror(errno));
    std::size_t off = 0;
    while (off < content.size()) {
        const auto n = ::write(fd, content.data() + off, content.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            throw Error(ErrorCode::Persistence, "write failed for " + tmp.string());
        }
        off += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        ::close(fd);
        throw Error(ErrorCode::Persistence, "fsync failed for " + tmp.string());
    }
    ::close(fd);
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw Error(ErrorCode::Persistence, "rename failed for " + path + ": " + ec.message());
    fsync_path(target.parent_path().empty() ? "." : target.parent_path().string(), O_RDONLY | O_DIRECTORY);
}

// ---------------------------------------------------------------- toml

namespace {

[[noreturn]] void toml_fail(int line, const std::string& what) {
    throw Error(ErrorCode::Configuration, "site config line " + std::to_string(line) + ": " + what);
}

std::string strip_comment(std::string_view s) {
    bool in_basic = false, in_literal = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_basic) {
            if (c == '\\') ++i;
            else if (c == '"') in_basic = false;
        } else if (in_literal) {
            if (c == '\'') in_literal = false;
        } else if (c == '"') {
            in_basic = true;
        } else if (c == '\'') {
            in_literal = true;
        } else if (c == '#') {
            return std::string(s.substr(0, i));
        }
    }
    return std::string(s);
}

// Parses one string starting at s[pos] (a quote); advances pos past it.
std::string parse_toml_string(std::string_view s, std::size_t& pos, int line) {
    const char q = s[pos++];
    std::string out;
    while (pos < s.size() && s[pos] != q) {
        char c = s[pos++];
        if (q == '"' && c == '\\') {
            if (pos >= s.size()) toml_fail(line, "dangling escape");
            c = s[pos++];
            switch (c) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: toml_fail(line, std::string("unsupported escape \\") + c);
            }
        } else {
            out += c;
        }
    }
    if (pos >= s.size()) toml_fail(line, "unterminated string");
    ++pos;
    return out;
}

TomlValue parse_toml_value(std::string_view v, int line) {
    if (v.empty()) toml_fail(line, "missing value");
    if (v.front() == '"' || v.front() == '\'') {
        std::size_t pos = 0;
        auto s = parse_toml_string(v, pos, line);
        if (!trim(v.substr(pos)).empty()) toml_fail(line, "trailing characters after string");
        return s;
    }
    if (v.front() == '[') {
        if (v.back() != ']') toml_fail(line, "arrays must be on one line");
        std::vector<std::string> items;
        std::size_t pos = 1;
        const std::size_t end = v.size() - 1;
        while (true) {
            while (pos < end && (v[pos] == ' ' || v[pos] == '\t')) ++pos;
            if (pos >= end) break;
            if (v[pos] != '"' && v[pos] != '\'') toml_fail(line, "arrays hold strings only");
            items.push_back(parse_toml_string(v, pos, line));
            while (pos < end && (v[pos] == ' ' || v[pos] == '\t')) ++pos;
            if (pos < end) {
                if (v[pos] != ',') toml_fail(line, "expected ',' in array");
                ++pos;
            }
        }
        return items;
    }
    if (v == "true") return true;
    if (v == "false") return false;
    std::string num;
    for (char c : v)
        if (c != '_') num += c;
    try {
        std::size_t used = 0;
        if (num.find_first_of(".eE") == std::string::npos) {
            const long long i = std::stoll(num, &used);
            if (used == num.size()) return static_cast<std::int64_t>(i);
        } else {
            const double d = std::stod(num, &used);
            if (used == num.size()) return d;
        }
    } catch (const std::exception&) {
    }
    toml_fail(line, "unrecognized value '" + std::string(v) + "'");
}

}  // namespace

TomlTable parse_toml(std::string_view text) {
    TomlTable out;
    std::string prefix;
    int line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) toml_fail(line_no, "bad table header");
            prefix = trim(std::string_view(line).substr(1, line.size() - 2)) + ".";
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) toml_fail(line_no, "expected key = value");
        std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.size() >= 2 && key.front() == '"' && key.back() == '"') key = key.substr(1, key.size() - 2);
        if (key.empty()) toml_fail(line_no, "empty key");
        key = prefix + key;
        if (out.count(key)) toml_fail(line_no, "duplicate key " + key);
        out[key] = parse_toml_value(trim(std::string_view(line).substr(eq + 1)), line_no);
    }
    return out;
}

// ---------------------------------------------------------------- site

std::string_view to_string(MappingSource s) {
    switch (s) {
        case MappingSource::RuleBased: return "rule";
        case MappingSource::VirtualGrid: return "grid";
        case MappingSource::Demonstration: return "demo";
        case MappingSource::AdminFile: return "admin";
    }
    return "rule";
}

MappingSource mapping_source_from_string(std::string_view s) {
    const auto n = normalize_label(s);
    if (n == "rule" || n == "rulebased") return MappingSource::RuleBased;
    if (n == "grid" || n == "virtualgrid") return MappingSource::VirtualGrid;
    if (n == "demo" || n == "demonstration") return MappingSource::Demonstration;
    if (n == "admin" || n == "adminfile") return MappingSource::AdminFile;
    throw Error(ErrorCode::Configuration, "unknown mapping source '" + std::string(s) + "'");
}

namespace {

template <class T>
const T* get(const TomlTable& t, const std::string& key) {
    auto it = t.find(key);
    if (it == t.end()) it = t.find("site." + key);
    if (it == t.end()) return nullptr;
    const T* v = std::get_if<T>(&it->second);
    if (!v) throw Error(ErrorCode::Configuration, "site key '" + key + "' has the wrong type");
    return v;
}

std::string resolve(const std::string& base, const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute() || base.empty()) return p;
    return (fs::path(base) / p).lexically_normal().string();
}

}  // namespace

SiteMetadata parse_site(std::string_view toml_text, const std::string& base_dir) {
    const auto t = parse_toml(toml_text);
    SiteMetadata s;
    const auto* id = get<std::string>(t, "site_id");
    if (!id || id->empty()) throw Error(ErrorCode::Configuration, "site config lacks site_id");
    s.site_id = *id;
    if (const auto* v = get<std::string>(t, "url")) s.url = *v;
    if (const auto* v = get<std::vector<std::string>>(t, "pages"))
        for (const auto& p : *v) s.page_html_paths.push_back(resolve(base_dir, p));
    if (const auto* v = get<std::string>(t, "mapping_source")) s.mapping_source = mapping_source_from_string(*v);
    if (const auto* v = get<std::string>(t, "admin_file")) s.admin_file = resolve(base_dir, *v);
    if (const auto* v = get<std::string>(t, "demo")) s.demo_path = resolve(base_dir, *v);
    const auto* fx = get<std::string>(t, "fixture");
    if (!fx) throw Error(ErrorCode::Configuration, "site " + s.site_id + " lacks a fixture");
    s.fixture_path = resolve(base_dir, *fx);
    auto it = t.find("cell_size");
    if (it == t.end()) it = t.find("site.cell_size");
    if (it != t.end()) {
        if (const auto* i = std::get_if<std::int64_t>(&it->second)) s.cell_size = static_cast<double>(*i);
        else if (const auto* d = std::get_if<double>(&it->second)) s.cell_size = *d;
        else throw Error(ErrorCode::Configuration, "cell_size must be a number");
        if (s.cell_size <= 0) throw Error(ErrorCode::Configuration, "cell_size must be positive");
    }
    if (const auto* v = get<std::int64_t>(t, "byte_budget")) {
        if (*v <= 0) throw Error(ErrorCode::Configuration, "byte_budget must be positive");
        s.byte_budget = static_cast<std::size_t>(*v);
    }
    if (s.page_html_paths.empty()) throw Error(ErrorCode::Configuration, "site " + s.site_id + " lists no pages");
    if (s.mapping_source == MappingSource::AdminFile && s.admin_file.empty())
        throw Error(ErrorCode::Configuration, "admin mapping source needs admin_file");
    if (s.mapping_source == MappingSource::AdminFile && !fs::exists(s.admin_file))
        throw Error(ErrorCode::Configuration, "admin_file " + s.admin_file + " does not exist");
    if (s.mapping_source == MappingSource::Demonstration && s.demo_path.empty())
        throw Error(ErrorCode::Configuration, "demo mapping source needs demo");
    return s;
}

SiteMetadata load_site(const std::string& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error&) {
        throw Error(ErrorCode::Configuration, "cannot read site config " + path);
    }
    return parse_site(text, fs::path(path).parent_path().string());
}

std::vector<std::map<std::string, std::string>> load_demo(const std::string& path) {
    std::vector<std::map<std::string, std::string>> out;
    try {
        const auto j = json::parse(read_file(path));
        for (const auto& page : j.at("pages")) {
            std::map<std::string, std::string> m;
            for (const auto& [k, v] : page.items()) m[k] = v.get<std::string>();
            out.push_back(std::move(m));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::LoadError, "bad demonstration file " + path + ": " + e.what());
    }
    return out;
}

// ---------------------------------------------------------------- status

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::Success: return "Success";
        case Outcome::Failure: return "Failure";
        case Outcome::Error: return "Error";
    }
    return "Error";
}

std::string_view to_string(Category c) {
    switch (c) {
        case Category::None: return "None";
        case Category::MissingField: return "MissingField";
        case Category::Network: return "Network";
        case Category::WidgetFailure: return "WidgetFailure";
        case Category::Unknown: return "Unknown";
    }
    return "Unknown";
}

namespace {

Outcome outcome_from(std::string_view s) {
    if (s == "Success") return Outcome::Success;
    if (s == "Failure") return Outcome::Failure;
    if (s == "Error") return Outcome::Error;
    throw Error(ErrorCode::LoadError, "unknown outcome " + std::string(s));
}

Category category_from(std::string_view s) {
    for (auto c : {Category::None, Category::MissingField, Category::Network, Category::WidgetFailure,
                   Category::Unknown})
        if (to_string(c) == s) return c;
    throw Error(ErrorCode::LoadError, "unknown category " + std::string(s));
}

const std::vector<std::string_view> kSuccessWords = {"successfully", "thank you", "registered", "submitted"};
const std::vector<std::string_view> kMissingWords = {"missing", "required", "mandatory"};
const std::vector<std::string_view> kNetworkWords = {"network", "timeout", "connection"};

bool mentions(const std::string& key, const std::vector<std::string_view>& words) {
    return std::any_of(words.begin(), words.end(),
                       [&](std::string_view w) { return key.find(ocr_key(w)) != std::string::npos; });
}

}  // namespace

Classification classify_status(const std::vector<TextRegion>& new_regions) {
    if (new_regions.empty()) return {Outcome::Failure, Category::None, "no feedback detected"};
    std::vector<std::string> texts;
    for (const auto& r : new_regions) texts.push_back(r.text());
    const std::string message = join(texts, " ");
    const std::string key = ocr_key(message);
    if (mentions(key, kSuccessWords)) return {Outcome::Success, Category::None, message};
    if (mentions(key, kMissingWords)) return {Outcome::Error, Category::MissingField, message};
    if (mentions(key, kNetworkWords)) return {Outcome::Error, Category::Network, message};
    return {Outcome::Failure, Category::None, message};
}

Category category_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownField:
        case ErrorCode::InvalidRequest: return Category::MissingField;
        case ErrorCode::ProviderUnavailable:
        case ErrorCode::ProviderTimeout:
        case ErrorCode::CassetteMiss: return Category::Network;
        case ErrorCode::OptionNotFound:
        case ErrorCode::NavigationTimeout:
        case ErrorCode::WidgetParse:
        case ErrorCode::InvalidDate: return Category::WidgetFailure;
        default: return Category::Unknown;
    }
}

std::string TaskStatus::to_json() const {
    json j{{"task_id", task_id},
           {"outcome", std::string(to_string(outcome))},
           {"category", std::string(to_string(category))},
           {"message", message},
           {"elapsed_ms", elapsed_ms},
           {"finished_at", finished_at}};
    return j.dump(2) + "\n";
}

TaskStatus TaskStatus::from_json(std::string_view text) {
    try {
        const auto j = json::parse(text);
        TaskStatus s;
        s.task_id = j.at("task_id").get<std::string>();
        s.outcome = outcome_from(j.at("outcome").get<std::string>());
        s.category = category_from(j.value("category", std::string("None")));
        s.message = j.value("message", std::string());
        s.elapsed_ms = j.value("elapsed_ms", std::int64_t{0});
        s.finished_at = j.value("finished_at", std::string());
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::LoadError, std::string("bad status record: ") + e.what());
    }
}

// ---------------------------------------------------------------- clocks

std::string Clock::timestamp(std::int64_t ms) {
    const std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms % 1000));
    return out;
}

std::int64_t SystemClock::now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

// ---------------------------------------------------------------- validation

Validation validate_request(const workflow::TaskRequest& request, const SiteMetadata& site,
                            const std::vector<html::FormElementDecl>& decls) {
    if (request.site_id != site.site_id)
        throw Error(ErrorCode::Configuration,
                    "request " + request.task_id + " names site " + request.site_id + ", expected " + site.site_id);
    Validation v;
    std::map<std::string, std::string> given;
    for (const auto& [k, val] : request.fields) given[normalize_label(k)] = trim(val);
    for (const auto& d : decls) {
        if (!d.required || d.kind == FieldKind::SubmitButton) continue;
        const auto it = given.find(normalize_label(d.label));
        if (it == given.end() || it->second.empty()) v.missing.push_back(d.label);
    }
    for (const auto& [k, val] : request.fields) {
        const bool known = std::any_of(decls.begin(), decls.end(), [&](const html::FormElementDecl& d) {
            return d.kind != FieldKind::SubmitButton && normalize_label(d.label) == normalize_label(k);
        });
        if (!known) v.warnings.push_back("field not on the form: " + k);
    }
    v.accepted = v.missing.empty();
    return v;
}

// ---------------------------------------------------------------- runner

std::string frame_text(const RenderedFrame& frame) {
    std::string out = std::to_string(frame.width) + "x" + std::to_string(frame.height) + "\n";
    char buf[96];
    for (const auto& r : frame.regions) {
        std::snprintf(buf, sizeof buf, "%g,%g,%g,%g,%.4f|", r.box().x(), r.box().y(), r.box().w(), r.box().h(),
                      r.confidence());
        out += buf;
        out += r.text();
        out += '\n';
    }
    return out;
}

namespace {

/// Session wrapper hashing every frame it hands out.
class RecordingEnv : public workflow::Environment {
public:
    explicit RecordingEnv(sim::Session& s) : s_(s) {}
    RenderedFrame capture() override {
        auto f = s_.capture();
        digest_ = fnv1a(frame_text(f), digest_);
        ++frames_;
        return f;
    }
    void perform(const workflow::Action& a) override { s_.perform(a); }
    std::uint64_t digest() const { return digest_; }
    std::size_t frames() const { return frames_; }

private:
    sim::Session& s_;
    std::uint64_t digest_ = 0xcbf29ce484222325ULL;
    std::size_t frames_ = 0;
};

layout::Source source_of(MappingSource m) {
    switch (m) {
        case MappingSource::RuleBased: return layout::Source::RuleBased;
        case MappingSource::VirtualGrid: return layout::Source::VirtualGrid;
        case MappingSource::Demonstration: return layout::Source::Demonstration;
        case MappingSource::AdminFile: return layout::Source::AdminOverride;
    }
    return layout::Source::RuleBased;
}

double number_arg(const llm::WorkflowStep& s, std::size_t i) {
    try {
        return std::stod(s.args.at(i));
    } catch (const std::exception&) {
        throw Error(ErrorCode::MappingParse, "workflow step " + s.op + " has a bad argument");
    }
}

}  // namespace

struct Runner::Impl {
    SiteMetadata site;
    RunOptions options;
    std::shared_ptr<Clock> clock;
    sim::VirtualForm form;
    llm::Provider provider;
    std::vector<std::vector<html::FormElementDecl>> decls;
    std::vector<std::map<std::string, std::string>> demo;
    std::vector<layout::MappingList> admin_pages;
    std::map<int, layout::MappingResult> demo_cache;

    Impl(SiteMetadata s, RunOptions o, std::shared_ptr<Clock> c)
        : site(std::move(s)), options(std::move(o)), clock(std::move(c)), provider(options.provider) {
        if (!clock) clock = std::make_shared<SystemClock>();
        try {
            form = sim::load_fixture(site.fixture_path);
        } catch (const Error& e) {
            throw Error(ErrorCode::Configuration, "site " + site.site_id + ": " + e.what(), e.detail());
        }
        if (form.pages.size() != site.page_html_paths.size())
            throw Error(ErrorCode::Configuration, "site " + site.site_id + " lists " +
                                                      std::to_string(site.page_html_paths.size()) +
                                                      " pages but its fixture has " +
                                                      std::to_string(form.pages.size()));
        const auto strategy = options.strategy.value_or(site.mapping_source);
        if (strategy == MappingSource::Demonstration) {
            if (site.demo_path.empty())
                throw Error(ErrorCode::Configuration, "demonstration mapping needs a demo file");
            demo = load_demo(site.demo_path);
        }
        if (strategy == MappingSource::AdminFile) load_admin();
    }

    void load_admin() {
        if (site.admin_file.empty()) throw Error(ErrorCode::Configuration, "admin mapping needs admin_file");
        const auto text = read_file(site.admin_file);
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::LoadError, "bad admin mapping file: " + std::string(e.what()));
        }
        if (j.is_object() && j.contains("pages")) {
            for (const auto& p : j["pages"]) admin_pages.push_back(layout::mapping_from_json(p.dump()));
        } else {
            admin_pages.push_back(layout::mapping_from_json(text));
        }
    }

    // Extraction happens lazily so a Replay provider can be swapped in
    // before the first task.
    void ensure_decls() {
        if (!decls.empty()) return;
        for (const auto& path : site.page_html_paths) {
            std::string raw;
            try {
                raw = read_file(path);
            } catch (const Error&) {
                throw Error(ErrorCode::Configuration, "cannot read page markup " + path);
            }
            const auto cleaned = html::clean_html(raw, site.byte_budget);
            const auto& tmpl = llm::PromptTemplate::builtin(llm::Intent::ExtractFields);
            const auto answer = provider.complete(tmpl, {{"html", cleaned.markup}});
            std::vector<html::FormElementDecl> page;
            for (const auto& f : llm::parse_extract_response(answer, {cleaned.markup})) {
                html::FormElementDecl d;
                d.label = f.label;
                d.kind = f.kind;
                d.options = f.options;
                d.required = f.required;
                d.dom_id = f.dom_id;
                page.push_back(std::move(d));
            }
            decls.push_back(std::move(page));
        }
    }
};

Runner::Runner(SiteMetadata site, RunOptions options, std::shared_ptr<Clock> clock)
    : impl_(std::make_unique<Impl>(std::move(site), std::move(options), std::move(clock))) {}

Runner::~Runner() = default;

const SiteMetadata& Runner::site() const noexcept { return impl_->site; }
const sim::VirtualForm& Runner::form() const noexcept { return impl_->form; }
Clock& Runner::clock() noexcept { return *impl_->clock; }

const std::vector<std::vector<html::FormElementDecl>>& Runner::decls() const noexcept {
    impl_->ensure_decls();
    return impl_->decls;
}

std::vector<html::FormElementDecl> Runner::all_decls() const {
    std::vector<html::FormElementDecl> out;
    for (const auto& p : decls()) out.insert(out.end(), p.begin(), p.end());
    return out;
}

layout::MappingResult Runner::raw_mapping(const RenderedFrame& frame, const std::vector<BBox>& edits,
                                          int page_index, MappingSource strategy) {
    auto& im = *impl_;
    const layout::RuleOptions rule{im.site.cell_size, 0.5, im.site.cell_size};
    switch (strategy) {
        case MappingSource::RuleBased: return layout::map_rule_based(frame.regions, edits, rule);
        case MappingSource::VirtualGrid: {
            const auto sheet =
                layout::build_grid_sheet(frame.regions, edits, im.site.cell_size, im.form.width, im.form.height);
            return layout::map_virtual_grid(sheet, im.provider, edits);
        }
        case MappingSource::Demonstration: {
            if (const auto it = im.demo_cache.find(page_index); it != im.demo_cache.end()) return it->second;
            if (im.demo.empty() && !im.site.demo_path.empty()) im.demo = load_demo(im.site.demo_path);
            if (page_index > static_cast<int>(im.demo.size()) || im.demo[page_index - 1].empty())
                throw Error(ErrorCode::MissingDemonstration,
                            "no demonstration values for page " + std::to_string(page_index));
            sim::Session admin(im.form, im.options.noise);
            admin.admin_goto_page(page_index);
            const auto empty = admin.capture();
            for (const auto& [label, value] : im.demo[page_index - 1]) admin.admin_fill(label, value);
            const auto filled = admin.capture();
            auto result = layout::map_by_demonstration(empty.regions, filled.regions, im.demo[page_index - 1],
                                                       admin.edit_boxes(), rule);
            im.demo_cache[page_index] = result;
            return result;
        }
        case MappingSource::AdminFile: {
            if (im.admin_pages.empty()) im.load_admin();
            if (page_index > static_cast<int>(im.admin_pages.size()))
                throw Error(ErrorCode::Configuration, "admin mapping has no page " + std::to_string(page_index));
            const auto& l = im.admin_pages[page_index - 1];
            layout::MappingResult r{l.entries, l.warnings};
            for (auto& e : r.entries) e.source = layout::Source::AdminOverride;
            return r;
        }
    }
    return {};
}

layout::MappingList Runner::map_page(const RenderedFrame& frame, const std::vector<BBox>& edits, int page_index,
                                     MappingSource strategy) {
    const auto& page_decls = decls().at(page_index - 1);
    auto raw = raw_mapping(frame, edits, page_index, strategy);
    for (const auto& d : page_decls) {
        if (d.kind != FieldKind::SubmitButton) continue;
        raw.entries.erase(std::remove_if(raw.entries.begin(), raw.entries.end(),
                                         [&](const layout::MappingEntry& e) {
                                             return ocr_key(e.field_name) == ocr_key(d.label);
                                         }),
                          raw.entries.end());
        const int i = find_region(frame.regions, d.label);
        if (i < 0) {
            raw.warnings.push_back("submit control not visible: " + d.label);
            continue;
        }
        layout::MappingEntry e;
        e.field_name = d.label;
        e.kind = FieldKind::SubmitButton;
        e.edit_anchor = frame.regions[i].box();
        e.source = source_of(strategy);
        raw.entries.push_back(std::move(e));
    }
    auto list = layout::merge_mapping_list(page_decls, raw.entries, frame.width, frame.height);
    list.warnings.insert(list.warnings.begin(), raw.warnings.begin(), raw.warnings.end());
    return list;
}

RunArtifacts Runner::run_task(const workflow::TaskRequest& request) {
    auto& im = *impl_;
    RunArtifacts art;
    art.status.task_id = request.task_id;
    const auto t0 = im.clock->now_ms();
    sim::Session session(im.form, im.options.noise);
    RecordingEnv env(session);
    const auto strategy = im.options.strategy.value_or(im.site.mapping_source);

    auto finish = [&](Outcome o, Category c, std::string msg) {
        art.status.outcome = o;
        art.status.category = c;
        art.status.message = std::move(msg);
    };

    try {
        const auto& all = decls();
        const int npages = static_cast<int>(all.size());
        bool done = false;
        for (int k = 1; k <= npages && !done; ++k) {
            workflow::EnvHandle h(env);
            const auto frame = h.capture();
            PageRun run;
            run.mapping = map_page(frame, session.edit_boxes(), k, strategy);
            run.script.task_id = request.task_id;
            run.script.page_index = k;

            workflow::TaskRequest page_req = request;
            page_req.fields.clear();
            for (const auto& [name, value] : request.fields)
                for (const auto& d : all[k - 1])
                    if (d.kind != FieldKind::SubmitButton && normalize_label(d.label) == normalize_label(name))
                        page_req.fields[name] = value;

            std::vector<std::string> known;
            const layout::MappingEntry* submit = nullptr;
            for (const auto& e : run.mapping.entries) {
                known.push_back(e.field_name);
                if (e.kind == FieldKind::SubmitButton && !submit) submit = &e;
            }
            if (!submit) throw Error(ErrorCode::UnknownField, "page " + std::to_string(k) + " has no submit control");

            const auto& tmpl = llm::PromptTemplate::builtin(llm::Intent::Workflow);
            const auto answer = im.provider.complete(
                tmpl, {{"mapping", layout::to_json(run.mapping)}, {"request", workflow::to_json(page_req)}});
            const auto steps = llm::parse_workflow_response(answer, known);

            bool submitted = false;
            for (const auto& s : steps) {
                using workflow::Action;
                if (s.op == "invoke") {
                    const auto* e = run.mapping.find(s.field);
                    if (!e) throw Error(ErrorCode::UnknownField, "workflow names unmapped field " + s.field);
                    workflow::FieldPlan plan;
                    plan.field_name = e->field_name;
                    plan.kind = e->kind;
                    for (const auto& v : split(s.args.at(1), ';'))
                        if (!trim(v).empty()) plan.values.push_back(trim(v));
                    if (plan.values.empty()) plan.values.push_back("");
                    plan.anchor = e->edit_anchor.center();
                    plan.box = e->edit_anchor;
                    plan.dom_id = e->dom_id;
                    workflow::execute_field(h, plan, im.options.limits);
                } else if (s.op == "click") {
                    const Point p{number_arg(s, 0), number_arg(s, 1)};
                    const bool is_submit = s.field == "control" && submit->edit_anchor.contains(p);
                    if (!is_submit) {
                        h.act(Action::click(p, s.field));
                        continue;
                    }
                    const auto before = h.capture();
                    h.act(Action::click(p, s.field));
                    const auto after = h.capture();
                    submitted = true;
                    const auto fresh = diff_frames(before, after);
                    if (k < npages) {
                        int wanted = 0, seen = 0;
                        for (const auto& d : all[k])
                            if (d.kind != FieldKind::SubmitButton) {
                                ++wanted;
                                if (find_region(after.regions, d.label) >= 0) ++seen;
                            }
                        if (wanted > 0 && 2 * seen >= wanted) break;  // next page is up
                    }
                    const auto c = classify_status(fresh);
                    finish(c.outcome, c.category, c.message);
                    done = true;
                    break;
                } else if (s.op == "type") {
                    h.act(Action::type(s.args.at(0), s.field));
                } else if (s.op == "press") {
                    h.act(Action::press(s.args.at(0), s.field));
                } else if (s.op == "scroll") {
                    h.act(Action::scroll({number_arg(s, 0), number_arg(s, 1)},
                                         static_cast<int>(std::lround(number_arg(s, 2))), s.field));
                } else if (s.op == "capture") {
                    h.capture(s.field);
                } else if (s.op == "wait") {
                    h.act(Action::wait(static_cast<int>(std::lround(number_arg(s, 0))), s.field));
                }
            }
            run.script.actions = h.log();
            art.pages.push_back(std::move(run));
            if (!submitted) {
                finish(Outcome::Failure, Category::Unknown,
                       "workflow for page " + std::to_string(k) + " never submitted");
                done = true;
            }
        }
        if (!done) finish(Outcome::Failure, Category::Unknown, "form ended without a response");
    } catch (const Error& e) {
        finish(Outcome::Error, category_of(e.code()), std::string(to_string(e.code())) + ": " + e.what());
    }
    art.filled = session.filled_values();
    art.frame_digest = env.digest();
    art.frames = env.frames();
    const auto t1 = im.clock->now_ms();
    art.status.elapsed_ms = t1 - t0;
    art.status.finished_at = Clock::timestamp(t1);
    return art;
}

// ---------------------------------------------------------------- queue

QueueSummary process_queue(const std::string& incoming_dir, const std::string& status_dir, Runner& runner,
                           const StageHook& hook) {
    QueueSummary sum;
    const fs::path in(incoming_dir), out(status_dir);
    const fs::path done = in / "done", failed = in / "failed";
    std::error_code ec;
    fs::create_directories(out, ec);
    fs::create_directories(done, ec);
    fs::create_directories(failed, ec);
    if (!fs::is_directory(in)) throw Error(ErrorCode::Configuration, "no incoming directory " + incoming_dir);

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename().string()[0] != '.')
            files.push_back(e.path());
    std::sort(files.begin(), files.end());

    auto stage = [&](std::string_view name, const fs::path& f) {
        if (hook) hook(name, f.filename().string());
    };
    auto move_to = [&](const fs::path& f, const fs::path& dir) {
        fs::rename(f, dir / f.filename(), ec);
        if (ec) throw Error(ErrorCode::Persistence, "cannot move " + f.string() + ": " + ec.message());
        fsync_path(in.string(), O_RDONLY | O_DIRECTORY);
    };

    for (const auto& f : files) {
        const auto stem = f.stem().string();
        const fs::path status_path = out / (stem + ".json");
        if (fs::exists(status_path)) {
            // Finished before an interruption; only the move is left.
            const auto st = TaskStatus::from_json(read_file(status_path.string()));
            move_to(f, st.outcome == Outcome::Success ? done : failed);
            ++sum.skipped;
            continue;
        }
        stage("read", f);
        TaskStatus status;
        status.task_id = stem;
        try {
            const auto req = workflow::parse_task_request(read_file(f.string()));
            status.task_id = req.task_id;
            const auto v = validate_request(req, runner.site(), runner.all_decls());
            stage("validated", f);
            if (!v.accepted) {
                status.outcome = Outcome::Error;
                status.category = Category::MissingField;
                status.message = "rejected: missing " + join(v.missing, ", ");
                ++sum.rejected;
            } else {
                status = runner.run_task(req).status;
            }
        } catch (const Error& e) {
            status.outcome = Outcome::Error;
            status.category = category_of(e.code());
            status.message = std::string(to_string(e.code())) + ": " + e.what();
            if (e.code() == ErrorCode::Configuration) ++sum.config_errors;
        }
        if (status.finished_at.empty()) {
            const auto t = runner.clock().now_ms();
            status.finished_at = Clock::timestamp(t);
        }
        stage("ran", f);
        write_file_atomic(status_path.string(), status.to_json());
        stage("status-written", f);
        move_to(f, status.outcome == Outcome::Success ? done : failed);
        stage("moved", f);
        ++sum.processed;
        if (status.outcome == Outcome::Success) ++sum.succeeded;
        else if (status.outcome == Outcome::Failure) ++sum.failed;
        else ++sum.errors;
    }
    return sum;
}

}  // namespace smartflow::orch
