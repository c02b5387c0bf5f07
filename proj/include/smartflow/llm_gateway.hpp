#pragma once

// Text-completion providers, prompt templates, cassettes and the response
// grammars every provider answer has to satisfy.

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smartflow/core.hpp"

namespace smartflow::llm {

enum class Intent { ExtractFields, GridMapping, Workflow };

std::string_view to_string(Intent intent);

using Slots = std::map<std::string, std::string>;

/// Template text with `{{name}}` slots.
struct PromptTemplate {
    Intent intent = Intent::ExtractFields;
    std::string text;
    int max_tokens = 1024;

    /// Slot names in first-appearance order.
    std::vector<std::string> slots() const;
    /// Throws Error(TemplateSlot) naming every unfilled slot.
    std::string render(const Slots& values) const;

    static const PromptTemplate& builtin(Intent intent);
};

/// Canonical form hashed for cassette lookup: LF line endings, trailing
/// blanks stripped per line, no trailing empty lines.
std::string canonicalize_prompt(std::string_view prompt);
/// Lowercase hex SHA-256 of the canonical prompt.
std::string prompt_hash(std::string_view prompt);

struct CassetteRecord {
    std::string hash;
    std::string prompt;
    std::string response;
    std::string timestamp;
};

/// Append-only JSON-lines file of exchanges.
class Cassette {
public:
    /// Reads and validates every line now. Throws Error(LoadError) on a
    /// malformed record and Error(Persistence) when the file cannot be read.
    static Cassette load(const std::string& path);

    const std::vector<CassetteRecord>& records() const noexcept { return records_; }
    /// Latest record with this hash, or nullptr.
    const CassetteRecord* find(std::string_view hash) const;

    /// Writes one line and flushes it; throws Error(Persistence).
    static void append(const std::string& path, const CassetteRecord& record);

private:
    std::vector<CassetteRecord> records_;
};

enum class ProviderKind { Offline, Replay, Remote };

std::string_view to_string(ProviderKind kind);
ProviderKind provider_kind_from_string(std::string_view name);

struct Endpoint {
    std::string url;
    std::string token_env;  // name of the variable holding the bearer token
    std::string model;
    int timeout_ms = 30000;
    int max_retries = 3;
    int backoff_ms = 200;  // doubled after every failed attempt
};

struct ProviderConfig {
    ProviderKind kind = ProviderKind::Offline;
    std::optional<Endpoint> endpoint;
    /// Replay reads it; Remote and Offline append to it when set.
    std::optional<std::string> cassette_path;
};

/// One handle serializes its requests; distinct handles are independent.
class Provider {
public:
    explicit Provider(ProviderConfig config);
    ~Provider();
    Provider(Provider&&) noexcept;
    Provider& operator=(Provider&&) noexcept;

    static Provider offline();

    ProviderKind kind() const noexcept;

    /// Renders the template and answers it. Offline answers come from the
    /// deterministic rule engines in the grammar a remote model is asked to
    /// use; Replay never touches the network.
    std::string complete(const PromptTemplate& tmpl, const Slots& slots);

    std::size_t network_calls() const noexcept;
    std::size_t replay_hits() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Deterministic answer for an intent, used by the Offline provider.
std::string offline_answer(Intent intent, const Slots& slots);

// ---- response grammars ----

/// `field_name -> row,col` optionally followed by ` [hint: text]`.
struct GridAssignment {
    std::string field;
    GridCell cell;
    std::optional<std::string> hint;

    bool operator==(const GridAssignment&) const = default;
};

struct ExtractedField {
    std::string label;
    FieldKind kind = FieldKind::TextInput;
    std::vector<std::string> options;
    bool required = false;
    std::string dom_id;
};

/// One action line of a Workflow answer: {"op", "args", "field"}.
struct WorkflowStep {
    std::string op;  // click, type, press, scroll, capture, wait, invoke
    std::vector<std::string> args;
    std::string field;
};

std::string format_grid_line(const GridAssignment& a);

/// Every parser throws Error(MappingParse) with the offending line in
/// detail(). `known` lists the names the input actually contains; a name
/// matches when its normalized form equals a known one (GridMapping,
/// Workflow) or occurs inside one (ExtractFields, where `known` holds the
/// page markup).
std::vector<GridAssignment> parse_grid_response(std::string_view text,
                                                const std::vector<std::string>& known);
std::vector<ExtractedField> parse_extract_response(std::string_view text,
                                                   const std::vector<std::string>& known);
std::vector<WorkflowStep> parse_workflow_response(std::string_view text,
                                                  const std::vector<std::string>& known);

/// Grammar check without keeping the result; an empty `known` skips the
/// name check.
void validate_response(Intent intent, std::string_view text, const std::vector<std::string>& known);

}  // namespace smartflow::llm
