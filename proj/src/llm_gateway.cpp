#include "smartflow/llm_gateway.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "smartflow/html_prep.hpp"
#include "smartflow/layout_mapping.hpp"
#include "smartflow/workflow.hpp"

namespace smartflow::llm {

using nlohmann::json;

std::string_view to_string(Intent intent) {
    switch (intent) {
        case Intent::ExtractFields: return "ExtractFields";
        case Intent::GridMapping: return "GridMapping";
        case Intent::Workflow: return "Workflow";
    }
    return "ExtractFields";
}

// ---- templates ----

std::vector<std::string> PromptTemplate::slots() const {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while ((pos = text.find("{{", pos)) != std::string::npos) {
        const std::size_t end = text.find("}}", pos + 2);
        if (end == std::string::npos) break;
        std::string name = text.substr(pos + 2, end - pos - 2);
        if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
        pos = end + 2;
    }
    return out;
}

std::string PromptTemplate::render(const Slots& values) const {
    std::vector<std::string> missing;
    for (const auto& s : slots())
        if (!values.count(s)) missing.push_back(s);
    if (!missing.empty())
        throw Error(ErrorCode::TemplateSlot, "unfilled template slots: " + join(missing, ", "),
                    join(missing, "\n"));
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t open = text.find("{{", pos);
        const std::size_t close = open == std::string::npos ? open : text.find("}}", open + 2);
        if (close == std::string::npos) {
            out.append(text, pos, std::string::npos);
            return out;
        }
        out.append(text, pos, open - pos);
        out += values.at(text.substr(open + 2, close - open - 2));
        pos = close + 2;
    }
}

const PromptTemplate& PromptTemplate::builtin(Intent intent) {
    static const PromptTemplate extract{
        Intent::ExtractFields,
        "Below is the HTML of a web form. List every input control a person would fill in.\n"
        "Reply with a JSON array only. Give each control as an object with the keys\n"
        "\"label\" (the field name shown to the user), \"kind\" (TextInput, TextArea, Dropdown,\n"
        "DatePicker, Radio, Checkbox or SubmitButton), \"options\" (the option texts, empty if\n"
        "none), \"required\" (true or false) and \"dom_id\".\n\n"
        "HTML:\n{{html}}\n",
        2048};
    static const PromptTemplate grid{
        Intent::GridMapping,
        "A form screen was cut into a grid of {{cols}} columns and {{rows}} rows of\n"
        "{{cell_size}}-pixel cells. The CSV lists the text inside each cell and its role:\n"
        "label (a field name), edit (an input area, written [E<n>]) or hint-candidate\n"
        "(helper text next to an input).\n"
        "Decide which label names each input area. A field name sits in the same cell as\n"
        "its input, to its left, or above it; when both exist, take the one on the left.\n"
        "Reply with one line per input area and no other text:\n"
        "<label> -> <row>,<col>\n"
        "where <row>,<col> is the input area's cell. Add \" [hint: <text>]\" at the end of a\n"
        "line when a hint-candidate belongs to that input.\n\n"
        "{{sheet}}",
        1024};
    static const PromptTemplate flow{
        Intent::Workflow,
        "Fill in a web form for a user. The mapping lists the form's fields with their kind\n"
        "and screen box; the request holds the values to enter.\n"
        "Reply with JSON lines only, one action per line, each an object\n"
        "{\"op\": ..., \"args\": [...], \"field\": ...}. Use \"click\" with [x, y] and \"type\"\n"
        "with [text] for text fields, and \"invoke\" with [kind, value] for dropdowns, date\n"
        "pickers, radio buttons and checkboxes. Visit fields top to bottom and finish with a\n"
        "click on the submit button using field \"control\".\n\n"
        "Mapping:\n{{mapping}}\n\nRequest:\n{{request}}\n",
        2048};
    switch (intent) {
        case Intent::ExtractFields: return extract;
        case Intent::GridMapping: return grid;
        case Intent::Workflow: return flow;
    }
    return extract;
}

// ---- hashing / cassette ----

std::string canonicalize_prompt(std::string_view prompt) {
    std::vector<std::string> lines;
    std::string cur;
    for (std::size_t i = 0; i < prompt.size(); ++i) {
        const char c = prompt[i];
        if (c == '\r') {
            if (i + 1 < prompt.size() && prompt[i + 1] == '\n') ++i;
        } else if (c != '\n') {
            cur.push_back(c);
            continue;
        }
        lines.push_back(cur);
        cur.clear();
    }
    lines.push_back(cur);
    for (auto& l : lines) {
        while (!l.empty() && (l.back() == ' ' || l.back() == '\t')) l.pop_back();
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    return join(lines, "\n");
}

std::string prompt_hash(std::string_view prompt) {
    const std::string canon = canonicalize_prompt(prompt);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(canon.data(), canon.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::Persistence, "sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

Cassette Cassette::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Persistence, "cannot read cassette " + path);
    Cassette c;
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            const json j = json::parse(line);
            CassetteRecord r{j.at("hash").get<std::string>(), j.at("prompt").get<std::string>(),
                             j.at("response").get<std::string>(), j.value("timestamp", "")};
            if (r.hash != prompt_hash(r.prompt))
                throw Error(ErrorCode::LoadError, "cassette line " + std::to_string(n) + ": hash mismatch");
            c.records_.push_back(std::move(r));
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::LoadError,
                        "cassette line " + std::to_string(n) + " is not a record: " + ex.what());
        }
    }
    return c;
}

const CassetteRecord* Cassette::find(std::string_view hash) const {
    for (auto it = records_.rbegin(); it != records_.rend(); ++it)
        if (it->hash == hash) return &*it;
    return nullptr;
}

void Cassette::append(const std::string& path, const CassetteRecord& record) {
    const json j = {{"hash", record.hash},
                    {"prompt", record.prompt},
                    {"response", record.response},
                    {"timestamp", record.timestamp}};
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorCode::Persistence, "cannot append to cassette " + path);
    out << j.dump() << "\n";
    out.flush();
    if (!out) throw Error(ErrorCode::Persistence, "write to cassette " + path + " failed");
}

// ---- providers ----

std::string_view to_string(ProviderKind kind) {
    switch (kind) {
        case ProviderKind::Offline: return "offline";
        case ProviderKind::Replay: return "replay";
        case ProviderKind::Remote: return "remote";
    }
    return "offline";
}

ProviderKind provider_kind_from_string(std::string_view name) {
    for (ProviderKind k : {ProviderKind::Offline, ProviderKind::Replay, ProviderKind::Remote})
        if (to_string(k) == name) return k;
    throw Error(ErrorCode::Configuration, "unknown provider: " + std::string(name));
}

namespace {

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string remote_text(const std::string& body) {
    try {
        const json j = json::parse(body);
        if (j.contains("text") && j["text"].is_string()) return j["text"];
        if (j.contains("choices") && !j["choices"].empty()) {
            const auto& c = j["choices"][0];
            if (c.contains("text")) return c["text"];
            if (c.contains("message")) return c["message"].at("content");
        }
    } catch (const json::exception&) {
    }
    return body;
}

}  // namespace

struct Provider::Impl {
    ProviderConfig config;
    std::optional<Cassette> cassette;
    std::mutex mu;
    std::size_t network_calls = 0;
    std::size_t replay_hits = 0;

    std::string call_remote(const PromptTemplate& tmpl, const std::string& prompt) {
        const Endpoint& ep = *config.endpoint;
        static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(ep.url, m, url_re))
            throw Error(ErrorCode::Configuration, "bad endpoint url");
        const std::string base = m[1];
        const std::string path = m[2].matched ? std::string(m[2]) : "/";

        httplib::Headers headers;
        if (!ep.token_env.empty())
            if (const char* tok = std::getenv(ep.token_env.c_str())) headers.emplace("Authorization", std::string("Bearer ") + tok);
        const json body = {{"model", ep.model}, {"prompt", prompt}, {"max_tokens", tmpl.max_tokens}};

        int backoff = ep.backoff_ms;
        std::string last_error;
        for (int attempt = 0; attempt <= ep.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
                backoff *= 2;
            }
            ++network_calls;
            httplib::Client cli(base);
            const auto to = std::chrono::milliseconds(std::max(1, ep.timeout_ms));
            cli.set_connection_timeout(to);
            cli.set_read_timeout(to);
            cli.set_write_timeout(to);
            auto res = cli.Post(path, headers, body.dump(), "application/json");
            if (!res) {
                last_error = httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500 || res->status == 429) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw Error(ErrorCode::ProviderUnavailable, "endpoint answered HTTP " + std::to_string(res->status));
            return remote_text(res->body);
        }
        throw Error(ErrorCode::ProviderUnavailable,
                    "no answer after " + std::to_string(ep.max_retries + 1) + " attempts: " + last_error);
    }
};

Provider::Provider(ProviderConfig config) : impl_(std::make_unique<Impl>()) {
    impl_->config = std::move(config);
    const auto& c = impl_->config;
    if (c.kind == ProviderKind::Remote && (!c.endpoint || c.endpoint->url.empty()))
        throw Error(ErrorCode::Configuration, "remote provider needs an endpoint");
    if (c.kind == ProviderKind::Replay) {
        if (!c.cassette_path) throw Error(ErrorCode::Configuration, "replay provider needs a cassette");
        impl_->cassette = Cassette::load(*c.cassette_path);
    }
}

Provider::~Provider() = default;
Provider::Provider(Provider&&) noexcept = default;
Provider& Provider::operator=(Provider&&) noexcept = default;

Provider Provider::offline() { return Provider(ProviderConfig{}); }

ProviderKind Provider::kind() const noexcept { return impl_->config.kind; }

std::size_t Provider::network_calls() const noexcept { return impl_->network_calls; }
std::size_t Provider::replay_hits() const noexcept { return impl_->replay_hits; }

std::string Provider::complete(const PromptTemplate& tmpl, const Slots& slots) {
    const std::string prompt = tmpl.render(slots);
    std::lock_guard<std::mutex> lock(impl_->mu);
    const auto& cfg = impl_->config;
    const std::string hash = prompt_hash(prompt);
    std::string response;
    switch (cfg.kind) {
        case ProviderKind::Replay: {
            const CassetteRecord* r = impl_->cassette->find(hash);
            if (!r) throw Error(ErrorCode::CassetteMiss, "no recorded answer for prompt " + hash, hash);
            ++impl_->replay_hits;
            return r->response;
        }
        case ProviderKind::Offline: response = offline_answer(tmpl.intent, slots); break;
        case ProviderKind::Remote: response = impl_->call_remote(tmpl, prompt); break;
    }
    validate_response(tmpl.intent, response, {});
    if (cfg.cassette_path) Cassette::append(*cfg.cassette_path, {hash, prompt, response, utc_now()});
    return response;
}

// ---- offline rule engines ----

namespace {

std::string slot(const Slots& s, const std::string& name) {
    const auto it = s.find(name);
    if (it == s.end()) throw Error(ErrorCode::TemplateSlot, "missing slot " + name, name);
    return it->second;
}

std::string extract_answer(const Slots& slots) {
    html::CleanedHtml page;
    page.markup = slot(slots, "html");
    page.original_bytes = page.cleaned_bytes = page.markup.size();
    json arr = json::array();
    for (const auto& d : html::extract_form_elements(page))
        arr.push_back({{"label", d.label},
                       {"kind", to_string(d.kind)},
                       {"options", d.options},
                       {"required", d.required},
                       {"dom_id", d.dom_id}});
    return arr.dump();
}

std::string grid_answer(const Slots& slots) {
    const double cell = std::stod(slot(slots, "cell_size"));
    const auto sheet = layout::parse_grid_sheet(slot(slots, "sheet"), cell, std::stoi(slot(slots, "cols")),
                                                std::stoi(slot(slots, "rows")));
    std::string out;
    for (const auto& m : layout::map_grid_neighborhood(sheet))
        out += format_grid_line({m.field, m.cell, m.hint}) + "\n";
    return out;
}

std::string workflow_answer(const Slots& slots) {
    const auto mapping = layout::mapping_from_json(slot(slots, "mapping"));
    const auto request = workflow::parse_task_request(slot(slots, "request"));
    std::string out;
    auto line = [&](const std::string& op, json args, const std::string& field) {
        out += json{{"op", op}, {"args", std::move(args)}, {"field", field}}.dump() + "\n";
    };
    for (const auto& p : workflow::plan_task(mapping, request)) {
        if (p.kind == FieldKind::TextInput || p.kind == FieldKind::TextArea) {
            for (const auto& a : workflow::compile_text_field(p)) {
                if (a.op == workflow::Op::Click)
                    line("click", {std::lround(a.at.x), std::lround(a.at.y)}, p.field_name);
                else
                    line("type", {a.text}, p.field_name);
            }
        } else {
            line("invoke", {std::string(to_string(p.kind)), join(p.values, ";")}, p.field_name);
        }
    }
    for (const auto& e : mapping.entries)
        if (e.kind == FieldKind::SubmitButton) {
            line("click", {std::lround(e.edit_anchor.center().x), std::lround(e.edit_anchor.center().y)},
                 "control");
            break;
        }
    return out;
}

}  // namespace

std::string offline_answer(Intent intent, const Slots& slots) {
    try {
        switch (intent) {
            case Intent::ExtractFields: return extract_answer(slots);
            case Intent::GridMapping: return grid_answer(slots);
            case Intent::Workflow: return workflow_answer(slots);
        }
    } catch (const std::invalid_argument&) {
        throw Error(ErrorCode::TemplateSlot, "numeric slot is not a number");
    }
    return {};
}

// ---- grammars ----

std::string format_grid_line(const GridAssignment& a) {
    std::string s = a.field + " -> " + std::to_string(a.cell.row) + "," + std::to_string(a.cell.col);
    if (a.hint) s += " [hint: " + *a.hint + "]";
    return s;
}

namespace {

std::vector<std::string> lines_of(std::string_view text) {
    std::vector<std::string> out;
    for (auto& l : split(text, '\n')) {
        std::string t = trim(l);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

bool known_exact(const std::string& name, const std::vector<std::string>* known) {
    if (!known) return true;
    const std::string n = normalize_label(name);
    for (const auto& k : *known)
        if (normalize_label(k) == n) return true;
    return false;
}

bool known_within(const std::string& name, const std::vector<std::string>* known) {
    if (!known) return true;
    const std::string n = normalize_label(name);
    for (const auto& k : *known)
        if (normalize_label(k).find(n) != std::string::npos) return true;
    return false;
}

[[noreturn]] void reject(const std::string& why, const std::string& line) {
    throw Error(ErrorCode::MappingParse, why + ": " + line, line);
}

std::vector<GridAssignment> grid_impl(std::string_view text, const std::vector<std::string>* known) {
    static const std::regex re(R"(^(.+)\s*->\s*(\d+)\s*,\s*(\d+)(\s*\[hint:\s*(.*)\])?$)");
    std::vector<GridAssignment> out;
    for (const auto& l : lines_of(text)) {
        std::smatch m;
        if (!std::regex_match(l, m, re)) reject("not a 'field -> row,col' line", l);
        GridAssignment a;
        a.field = trim(std::string(m[1]));
        if (a.field.empty()) reject("empty field name", l);
        a.cell = {std::stoi(m[3]), std::stoi(m[2])};
        if (m[4].matched) a.hint = trim(std::string(m[5]));
        if (!known_exact(a.field, known)) reject("unknown field name", l);
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<ExtractedField> extract_impl(std::string_view text, const std::vector<std::string>* known) {
    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::exception&) {
        reject("not a JSON array", std::string(text));
    }
    if (!arr.is_array()) reject("not a JSON array", std::string(text));
    std::vector<ExtractedField> out;
    for (const auto& o : arr) {
        const std::string line = o.dump();
        if (!o.is_object() || !o.contains("label") || !o["label"].is_string() || !o.contains("kind") ||
            !o["kind"].is_string())
            reject("element needs string label and kind", line);
        ExtractedField f;
        f.label = trim(o["label"].get<std::string>());
        if (f.label.empty()) reject("empty label", line);
        f.kind = field_kind_from_string(o["kind"].get<std::string>());
        try {
            f.options = o.value("options", std::vector<std::string>{});
            f.required = o.value("required", false);
            f.dom_id = o.value("dom_id", "");
        } catch (const json::exception&) {
            reject("bad options/required/dom_id", line);
        }
        if (!known_within(f.label, known)) reject("label not on the page", line);
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<WorkflowStep> workflow_impl(std::string_view text, const std::vector<std::string>* known) {
    std::vector<WorkflowStep> out;
    for (const auto& l : lines_of(text)) {
        json o;
        try {
            o = json::parse(l);
        } catch (const json::exception&) {
            reject("not a JSON object", l);
        }
        if (!o.is_object() || !o.contains("op") || !o["op"].is_string() || !o.contains("args") ||
            !o["args"].is_array())
            reject("action needs op and args", l);
        WorkflowStep s;
        s.op = o["op"];
        s.field = o.value("field", "control");
        std::size_t numbers = 0, strings = 0;
        for (const auto& a : o["args"]) {
            if (a.is_number()) {
                ++numbers;
                s.args.push_back(a.dump());
            } else if (a.is_string()) {
                ++strings;
                s.args.push_back(a.get<std::string>());
            } else {
                reject("arguments must be numbers or strings", l);
            }
        }
        bool ok = false;
        if (s.op == "click") ok = numbers == 2 && strings == 0;
        else if (s.op == "type" || s.op == "press") ok = strings == 1 && numbers == 0;
        else if (s.op == "scroll") ok = numbers == 3 && strings == 0;
        else if (s.op == "capture") ok = s.args.empty();
        else if (s.op == "wait") ok = numbers == 1 && strings == 0;
        else if (s.op == "invoke") ok = strings == 2 && numbers == 0;
        else reject("unknown op", l);
        if (!ok) reject("wrong arguments for " + s.op, l);
        if (s.field != "control" && !known_exact(s.field, known)) reject("unknown field name", l);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

std::vector<GridAssignment> parse_grid_response(std::string_view text,
                                                const std::vector<std::string>& known) {
    return grid_impl(text, &known);
}

std::vector<ExtractedField> parse_extract_response(std::string_view text,
                                                   const std::vector<std::string>& known) {
    return extract_impl(text, &known);
}

std::vector<WorkflowStep> parse_workflow_response(std::string_view text,
                                                  const std::vector<std::string>& known) {
    return workflow_impl(text, &known);
}

void validate_response(Intent intent, std::string_view text, const std::vector<std::string>& known) {
    // An empty `known` means a grammar-only check (used inside complete()).
    const std::vector<std::string>* k = known.empty() ? nullptr : &known;
    switch (intent) {
        case Intent::ExtractFields: extract_impl(text, k); break;
        case Intent::GridMapping: grid_impl(text, k); break;
        case Intent::Workflow: workflow_impl(text, k); break;
    }
}

}  // namespace smartflow::llm
