#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cvabench/io.hpp"
#include "cvabench/llm_gateway.hpp"
#include "cvabench/model.hpp"
#include "cvabench/nl_metrics.hpp"

namespace cvabench::eval {

enum class JobStatus { pending, running, done, failed, cancelled };
std::string_view to_string(JobStatus s);
std::optional<JobStatus> parse_job_status(std::string_view s);

struct EvalJob {
  ModelRef model;
  int prompt_index = 1;
  std::string conversation_id;
  int turn_index = 1;
  int run_index = 1;
  JobStatus status = JobStatus::pending;

  std::string key() const;
  bool operator==(const EvalJob&) const = default;
};

inline constexpr int kMinRuns = 1;
inline constexpr int kMaxRuns = 5;

/// Metric ids selected by the config; an empty selection means every metric.
std::vector<std::string> selected_metrics(const ExperimentConfig& config);

/// One job per (model, prompt, conversation turn, run), ordered by model,
/// prompt, conversation, run and then turn. Throws ValidationError.
std::vector<EvalJob> plan_experiment(const ExperimentConfig& config, const std::vector<TestCase>& suite);

struct CellResult {
  EvalJob job;
  std::optional<ModelResponse> response;
  std::vector<MetricScore> viz_scores;
  std::vector<MetricScore> nl_scores;
  std::vector<MetricScore> nlg_scores;
  std::optional<double> overall_viz;
  std::optional<double> overall_nl;
  std::string error;  // failed jobs only

  bool operator==(const CellResult&) const = default;
};

struct GroupStats {
  std::map<std::string, double> metric_means;
  std::map<std::string, int> metric_coverage;  // positions contributing to each mean
  std::optional<double> overall_viz;
  std::optional<double> overall_nl;
  std::optional<double> combined;
  int cells = 0;  // completed cells in the group

  bool operator==(const GroupStats&) const = default;
};

struct ConfigAggregate {
  ModelRef model;
  int prompt_index = 1;
  GroupStats stats;

  bool operator==(const ConfigAggregate&) const = default;
};

struct BreakdownEntry {
  std::string dimension;  // chartType | ambiguity | contextHandling | turnIndex
  std::string label;
  ModelRef model;
  int prompt_index = 1;
  GroupStats stats;

  bool operator==(const BreakdownEntry&) const = default;
};

struct Recommendation {
  ModelRef model;
  int prompt_index = 1;
  double combined = 0;
  std::string rationale;

  bool operator==(const Recommendation&) const = default;
};

struct AggregateReport {
  std::vector<ConfigAggregate> configs;
  std::vector<BreakdownEntry> breakdowns;
  std::optional<Recommendation> recommendation;
  bool partial = false;
  int planned = 0;
  int completed = 0;
  int failed = 0;
  int cancelled = 0;
  std::string coverage_note;

  bool operator==(const AggregateReport&) const = default;
};

/// Group statistics over any subset of completed cells, using the same
/// run-then-cell averaging as the aggregate.
GroupStats summarize(const std::vector<CellResult>& cells);

/// Means over runs per cell (judge metrics average the raw 1-5 score before
/// scaling), then over cells. Throws std::runtime_error with no completed cells.
AggregateReport aggregate(const std::vector<CellResult>& cells, const std::vector<TestCase>& suite,
                          const ExperimentConfig& config, int planned, bool partial);

/// Argmax of the combined score with ties broken by viz mean, then model
/// order in the config, then prompt index.
std::optional<Recommendation> recommend_best(const AggregateReport& report, const ExperimentConfig& config);

struct Results {
  std::string experiment_id;
  ExperimentConfig config;
  std::vector<CellResult> cells;
  std::optional<AggregateReport> aggregate;
  bool partial = false;

  bool operator==(const Results&) const = default;
};

json cell_result_to_json(const CellResult& c);
CellResult cell_result_from_json(const json& j);
json aggregate_to_json(const AggregateReport& a);
AggregateReport aggregate_from_json(const json& j);
json results_to_json(const Results& r);
Results results_from_json(const json& j);
Results load_results(const std::filesystem::path& path);

enum class ExportFormat { json, csv };
/// JSON is lossless; CSV has one row per cell and metric. Written atomically.
void export_results(const Results& r, ExportFormat format, const std::filesystem::path& path);
std::string results_csv(const Results& r);

struct Event {
  std::string type;  // cell | failure | cancelled | aggregate
  std::optional<CellResult> cell;
  std::optional<AggregateReport> aggregate;
  int completed = 0;  // jobs with a terminal status so far
  int total = 0;
  bool partial = false;

  double progress() const { return total ? static_cast<double>(completed) / total : 1.0; }
  json to_json() const;
};

using EventSink = std::function<void(const Event&)>;

class CancelToken {
 public:
  void cancel() { flag_ = true; }
  void reset() { flag_ = false; }
  bool cancelled() const { return flag_; }

 private:
  std::atomic<bool> flag_{false};
};

struct EvalInputs {
  ExperimentConfig config;
  std::vector<TestCase> suite;  // already filtered by the selection, or the full suite
  std::vector<Datasource> datasources;
  std::map<std::string, nl::JudgeRubric> rubrics;
};

struct RunOptions {
  std::string experiment_id;  // generated when empty
  int workers = 4;
  /// Directory holding the cells.jsonl checkpoint; completed cells found
  /// there are reused instead of re-queried.
  std::filesystem::path checkpoint_dir;
};

std::string new_experiment_id();

/// Runs every planned job and returns the results. Events are delivered one
/// at a time in completion order, ending with a single aggregate event.
Results run_experiment(const EvalInputs& inputs, llm::Gateway& gateway, const RunOptions& options,
                       const EventSink& sink = {}, const CancelToken* cancel = nullptr);

/// Completed cells recorded in a checkpoint directory.
std::vector<CellResult> load_checkpoint(const std::filesystem::path& dir);

}  // namespace cvabench::eval
