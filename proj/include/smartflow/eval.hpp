#pragma once

// OCR error rates, dataset loading, run scoring and report tables.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smartflow/orchestrator.hpp"
#include "smartflow/simulator.hpp"
#include "smartflow/workflow.hpp"

namespace smartflow::eval {

/// Character edit distance over reference length. Throws
/// Error(UndefinedMetric) for an empty reference.
double cer(std::string_view reference, std::string_view hypothesis);
/// Same over whitespace-delimited tokens.
double wer(std::string_view reference, std::string_view hypothesis);

struct TruthRow {
    std::string task_id;
    orch::Outcome expected = orch::Outcome::Success;
    std::map<std::string, std::string> fields;  // label -> expected committed value
};

/// One layout of one application: `apps/<app>/<layout>/`.
struct LayoutBundle {
    std::string app;
    std::string layout;
    std::string dir;
    orch::SiteMetadata site;
    sim::VirtualForm form;
    std::vector<workflow::TaskRequest> tasks;
    std::map<std::string, TruthRow> truth;
    std::map<std::string, std::string> mapping_truth;  // field name -> dom_id
    std::vector<std::string> warnings;

    std::string name() const { return app.empty() ? layout : app + "/" + layout; }
};

/// Header is `task_id` plus field labels. Throws Error(LoadError) for a
/// column that is not a widget label of `form`.
std::vector<workflow::TaskRequest> load_tasks_csv(std::string_view text, const std::string& site_id,
                                                  const sim::VirtualForm& form);
/// Header is `task_id,expected_outcome` plus field labels; unknown columns
/// are dropped with a warning.
std::map<std::string, TruthRow> load_truth_csv(std::string_view text, const sim::VirtualForm& form,
                                               std::vector<std::string>* warnings = nullptr);

/// Throws Error(LoadError) for a missing or malformed file and
/// Error(IncompleteTruth) when a task has no truth row.
LayoutBundle load_layout(const std::string& dir);
/// Every `apps/<app>/<layout>` under `root`, sorted by path.
std::vector<LayoutBundle> load_dataset(const std::string& root);

struct ReportRow {
    std::string layout;
    int page = 1;
    std::optional<double> cer, wer;
    std::optional<double> mapping_rule, mapping_grid;
    std::optional<double> filled, submission;
    std::optional<double> minutes;
    std::optional<double> datepicker, dropdown, choice;
};

struct MetricReport {
    std::vector<ReportRow> rows;
    /// Column-wise mean over rows that have the value.
    ReportRow average() const;
};

enum class Format { Csv, Markdown };

/// Column order: layout, page, CER, WER, the two mapping accuracies,
/// filled data, request submission, minutes, then the three widget kinds.
/// Three decimals, "-" where a value is absent, last row "Average".
std::string emit_report(const MetricReport& report, Format format);

struct ScoreOptions {
    sim::Noise noise;
    llm::ProviderConfig provider;  // for the grid strategy
};

/// One row per page of the layout from the runs of its tasks. Throws
/// Error(IncompleteTruth) when a run has no truth row.
std::vector<ReportRow> score_run(const LayoutBundle& bundle,
                                 const std::map<std::string, orch::RunArtifacts>& runs,
                                 const ScoreOptions& options);

/// Mapping accuracy of one strategy on one page's initial frame.
double page_mapping_accuracy(const LayoutBundle& bundle, int page, orch::MappingSource strategy,
                             const ScoreOptions& options);

struct SuiteOptions {
    orch::RunOptions run;
    /// Null means a fresh StepClock per layout, for reproducible reports.
    std::shared_ptr<orch::Clock> clock;
};

struct SuiteResult {
    MetricReport report;
    std::map<std::string, std::map<std::string, orch::RunArtifacts>> runs;  // layout -> task -> run
};

/// Runs every task of every bundle and scores it.
SuiteResult run_suite(const std::vector<LayoutBundle>& bundles, const SuiteOptions& options);

/// Committed value equality: trimmed, and order-free for ";"-joined sets.
bool values_match(FieldKind kind, std::string_view expected, std::string_view actual);

}  // namespace smartflow::eval
