#pragma once

// The task loop: site configuration, request validation, per-page
// map/compile/execute, outcome classification and the status directory.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "smartflow/html_prep.hpp"
#include "smartflow/layout_mapping.hpp"
#include "smartflow/llm_gateway.hpp"
#include "smartflow/simulator.hpp"
#include "smartflow/workflow.hpp"

namespace smartflow::orch {

// ---- configuration ----

/// Values of the TOML subset sites are written in.
using TomlValue = std::variant<std::string, std::int64_t, double, bool, std::vector<std::string>>;
using TomlTable = std::map<std::string, TomlValue>;  // dotted keys for [tables]

/// Flat key/value pairs, [table] headers, strings, integers, floats,
/// booleans and single-line string arrays. Throws Error(Configuration).
TomlTable parse_toml(std::string_view text);

enum class MappingSource { RuleBased, VirtualGrid, Demonstration, AdminFile };

std::string_view to_string(MappingSource s);
/// "rule", "grid", "demo" or "admin".
MappingSource mapping_source_from_string(std::string_view s);

struct SiteMetadata {
    std::string site_id;
    std::string url;
    std::vector<std::string> page_html_paths;
    MappingSource mapping_source = MappingSource::RuleBased;
    std::string admin_file;  // AdminFile only
    std::string demo_path;   // dummy values for Demonstration
    std::string fixture_path;
    double cell_size = 40;
    std::size_t byte_budget = 200000;
};

/// Relative paths resolve against `base_dir`. Throws Error(Configuration).
SiteMetadata parse_site(std::string_view toml_text, const std::string& base_dir);
SiteMetadata load_site(const std::string& path);

/// Dummy values per page, from {"pages": [{field: value}, ...]}.
std::vector<std::map<std::string, std::string>> load_demo(const std::string& path);

// ---- status ----

enum class Outcome { Success, Failure, Error };
enum class Category { None, MissingField, Network, WidgetFailure, Unknown };

std::string_view to_string(Outcome o);
std::string_view to_string(Category c);

struct Classification {
    Outcome outcome = Outcome::Failure;
    Category category = Category::None;
    std::string message;
};

/// Keyword tables, first match wins: success, then missing-field and
/// network (both Error outcomes); otherwise Failure carrying the text.
Classification classify_status(const std::vector<TextRegion>& new_regions);

struct TaskStatus {
    std::string task_id;
    Outcome outcome = Outcome::Failure;
    Category category = Category::None;
    std::string message;
    std::int64_t elapsed_ms = 0;
    std::string finished_at;

    std::string to_json() const;
    static TaskStatus from_json(std::string_view text);
};

Category category_of(ErrorCode code);

// ---- clocks ----

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() = 0;
    /// UTC ISO-8601 for `ms` since the epoch.
    static std::string timestamp(std::int64_t ms);
};

class SystemClock : public Clock {
public:
    std::int64_t now_ms() override;
};

/// Advances by a fixed step on every reading; makes statuses reproducible.
class StepClock : public Clock {
public:
    explicit StepClock(std::int64_t start_ms = 1700000000000, std::int64_t step_ms = 1000)
        : t_(start_ms), step_(step_ms) {}
    std::int64_t now_ms() override {
        const auto v = t_;
        t_ += step_;
        return v;
    }

private:
    std::int64_t t_;
    std::int64_t step_;
};

// ---- validation ----

struct Validation {
    bool accepted = false;
    std::vector<std::string> missing;
    std::vector<std::string> warnings;
};

/// Accepted iff every required declaration has a non-empty value. Extra
/// fields only warn. Throws Error(Configuration) when the request names a
/// different site.
Validation validate_request(const workflow::TaskRequest& request, const SiteMetadata& site,
                            const std::vector<html::FormElementDecl>& decls);

// ---- running ----

struct RunOptions {
    std::optional<MappingSource> strategy;  // overrides the site's choice
    llm::ProviderConfig provider;
    sim::Noise noise;
    workflow::PlannerLimits limits;
};

struct PageRun {
    layout::MappingList mapping;
    workflow::ActionScript script;
};

struct RunArtifacts {
    TaskStatus status;
    std::vector<PageRun> pages;
    std::map<std::string, std::string> filled;
    std::uint64_t frame_digest = 0;  // hash over every captured frame
    std::size_t frames = 0;
};

/// Stable text form of a frame, for digests and debugging.
std::string frame_text(const RenderedFrame& frame);

/// Owns the site's fixture, page declarations and provider handle.
class Runner {
public:
    Runner(SiteMetadata site, RunOptions options, std::shared_ptr<Clock> clock = nullptr);
    ~Runner();

    const SiteMetadata& site() const noexcept;
    const sim::VirtualForm& form() const noexcept;
    /// Declarations per page, extracted through the provider.
    const std::vector<std::vector<html::FormElementDecl>>& decls() const noexcept;
    std::vector<html::FormElementDecl> all_decls() const;
    Clock& clock() noexcept;

    /// Merged mapping for page `page_index` (1-based) from a frame of that
    /// page and its edit boxes. Demonstration runs its own admin session.
    layout::MappingList map_page(const RenderedFrame& frame, const std::vector<BBox>& edits, int page_index,
                                 MappingSource strategy);
    /// Strategy output before the merge (no submit entry).
    layout::MappingResult raw_mapping(const RenderedFrame& frame, const std::vector<BBox>& edits,
                                      int page_index, MappingSource strategy);

    /// Never throws for stage failures: they become Error statuses.
    RunArtifacts run_task(const workflow::TaskRequest& request);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// ---- queue ----

struct QueueSummary {
    int processed = 0;
    int succeeded = 0;
    int failed = 0;
    int errors = 0;
    int rejected = 0;
    int skipped = 0;
    int config_errors = 0;
};

/// Called with a stage name between pipeline steps; throwing from it
/// simulates a crash at that point.
using StageHook = std::function<void(std::string_view stage, std::string_view task_file)>;

/// Processes `*.json` task files in filename order, one at a time. Each
/// status is written durably before its task file moves to done/.
QueueSummary process_queue(const std::string& incoming_dir, const std::string& status_dir, Runner& runner,
                           const StageHook& hook = {});

/// Writes via temp file, fsync and rename.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace smartflow::orch
