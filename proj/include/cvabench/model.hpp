#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace cvabench {

enum class DataType { nominal, ordinal, quantitative, temporal };

/// A single cell value in a datasource column or a filter clause.
using Scalar = std::variant<std::monostate, bool, double, std::string>;

std::string scalar_to_string(const Scalar& v);
std::optional<double> scalar_as_number(const Scalar& v);

struct DataField {
  std::string name;
  std::vector<std::string> aliases;
  DataType data_type = DataType::nominal;
  bool type_inferred = false;
  std::vector<Scalar> values;

  bool operator==(const DataField&) const = default;
};

struct Datasource {
  std::string title;
  std::vector<DataField> fields;

  /// Resolves a field reference by name or alias. Matching ignores case,
  /// whitespace and punctuation ("SalesRegion" finds alias "Sales Region").
  const DataField* find(std::string_view ref) const;
  std::size_t row_count() const;
  std::size_t distinct_count(const DataField& field) const;

  bool operator==(const Datasource&) const = default;
};

enum class MarkType { bar, line, area, point, pie, histogram, boxplot, table, heatmap, other };

struct Mark {
  MarkType type = MarkType::bar;
  std::string other_name;  // only meaningful for MarkType::other

  bool operator==(const Mark&) const = default;
};

enum class Channel { x, y, color, shape, opacity, size, text };
enum class Aggregate { sum, mean, count, min, max, median, none };
enum class ScaleType { linear, log, sqrt, ordinal, time };
enum class FilterOp { eq, neq, in, range, top_n, not_null };
enum class SortDirection { asc, desc };
enum class Interaction { selection, zoom, pan, drilldown };

inline constexpr Channel kAllChannels[] = {Channel::x,       Channel::y,    Channel::color,
                                           Channel::shape,   Channel::opacity,
                                           Channel::size,    Channel::text};
inline constexpr Channel kNonPositionalChannels[] = {Channel::color, Channel::shape,
                                                     Channel::opacity, Channel::text,
                                                     Channel::size};

struct EncodingBinding {
  std::string field;  // may be empty when aggregate == count
  std::optional<Aggregate> aggregate;
  std::optional<ScaleType> scale;
  std::optional<bool> zero;

  bool aggregated() const { return aggregate && *aggregate != Aggregate::none; }
  bool operator==(const EncodingBinding&) const = default;
};

struct TooltipField {
  std::string field;
  std::optional<Aggregate> aggregate;
  std::string format;  // d3-style format or unit label; empty when none

  bool operator==(const TooltipField&) const = default;
};

struct FilterClause {
  std::string field;
  FilterOp op = FilterOp::eq;
  std::vector<Scalar> values;
  std::optional<std::string> measure;  // ranking measure for top-n

  bool operator==(const FilterClause&) const = default;
};

struct SortClause {
  std::string field;
  std::optional<SortDirection> direction;

  bool operator==(const SortClause&) const = default;
};

struct VizSpec {
  Mark mark;
  std::map<Channel, EncodingBinding> encoding;
  std::vector<TooltipField> tooltip;
  std::vector<FilterClause> filters;
  std::optional<SortClause> sort;
  std::set<Interaction> interactions;

  const EncodingBinding* binding(Channel c) const {
    auto it = encoding.find(c);
    return it == encoding.end() ? nullptr : &it->second;
  }
  bool operator==(const VizSpec&) const = default;
};

enum class Ambiguity { syntactic, semantic, pragmatic };
enum class ContextHandling { slot_filling, reference_resolution, filter_carryover, none };

struct TurnLabels {
  std::string chart_type;
  std::set<Ambiguity> ambiguity;
  std::set<ContextHandling> context_handling;
  std::vector<std::string> inferencing;

  bool operator==(const TurnLabels&) const = default;
};

struct ExpectedResponse {
  VizSpec viz_spec;
  std::string nl_explanation;

  bool operator==(const ExpectedResponse&) const = default;
};

struct ConversationTurn {
  std::string utterance;
  std::vector<std::string> variations;
  TurnLabels labels;
  std::vector<ExpectedResponse> expected;

  bool operator==(const ConversationTurn&) const = default;
};

struct TestCase {
  std::string conversation_id;
  std::string datasource_ref;
  std::vector<ConversationTurn> turns;  // turn index = position + 1

  bool operator==(const TestCase&) const = default;
};

enum class ParseStatus { ok, repaired, failed };

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  bool operator==(const TokenUsage&) const = default;
};

struct ModelResponse {
  std::optional<VizSpec> viz_spec;
  std::string nl_text;
  std::string raw_output;
  double latency_ms = 0.0;
  std::optional<TokenUsage> token_usage;
  ParseStatus parse_status = ParseStatus::failed;

  bool operator==(const ModelResponse&) const = default;
};

enum class MetricStatus { scored, unavailable, not_applicable };

struct MetricScore {
  std::string metric_id;
  MetricStatus status = MetricStatus::scored;
  double value = 0.0;
  std::optional<double> raw_judge_score;
  std::string explanation;
  std::optional<std::string> expected_fragment;
  std::optional<std::string> actual_fragment;
  std::optional<std::string> judge_rationale;

  bool scored() const { return status == MetricStatus::scored; }
  bool operator==(const MetricScore&) const = default;
};

struct ModelRef {
  std::string provider_id;
  std::string model_id;
  std::string family;
  std::string display_name;

  std::string key() const { return provider_id + "/" + model_id; }
  bool operator==(const ModelRef&) const = default;
};

struct ExperimentConfig {
  std::vector<ModelRef> models;
  std::vector<std::string> system_prompts;  // prompt index = position + 1
  std::string test_case_selection;          // blank = all
  std::set<std::string> metric_selection;
  int runs = 3;
  std::optional<ModelRef> judge_model;
  bool strict = false;

  bool operator==(const ExperimentConfig&) const = default;
};

// Metric identifiers.
namespace metric_id {
inline constexpr std::string_view data_fidelity = "data_fidelity";
inline constexpr std::string_view field_similarity = "field_similarity";
inline constexpr std::string_view chart_type_similarity = "chart_type_similarity";
inline constexpr std::string_view axis_accuracy = "axis_accuracy";
inline constexpr std::string_view filter_accuracy = "filter_accuracy";
inline constexpr std::string_view sort_accuracy = "sort_accuracy";
inline constexpr std::string_view encoding_accuracy = "encoding_accuracy";
inline constexpr std::string_view interactivity_accuracy = "interactivity_accuracy";
inline constexpr std::string_view factual_grounding = "factual_grounding";
inline constexpr std::string_view assumptions_disclosure = "assumptions_disclosure";
inline constexpr std::string_view insightfulness = "insightfulness";
inline constexpr std::string_view coherence = "coherence";
inline constexpr std::string_view followup_relevance = "followup_relevance";
inline constexpr std::string_view nlg_precision = "nlg_precision";
inline constexpr std::string_view nlg_recall = "nlg_recall";
inline constexpr std::string_view nlg_f1 = "nlg_f1";
}  // namespace metric_id

const std::vector<std::string>& viz_metric_ids();
const std::vector<std::string>& nl_metric_ids();
const std::vector<std::string>& judge_metric_ids();
const std::vector<std::string>& nlg_metric_ids();
const std::vector<std::string>& all_metric_ids();
bool is_viz_metric(std::string_view id);
bool is_nl_metric(std::string_view id);
bool is_judge_metric(std::string_view id);
bool is_nlg_metric(std::string_view id);

// Enum names, as used in files.
std::string_view to_string(DataType v);
std::string_view to_string(MarkType v);
std::string_view to_string(Channel v);
std::string_view to_string(Aggregate v);
std::string_view to_string(ScaleType v);
std::string_view to_string(FilterOp v);
std::string_view to_string(SortDirection v);
std::string_view to_string(Interaction v);
std::string_view to_string(Ambiguity v);
std::string_view to_string(ContextHandling v);
std::string_view to_string(ParseStatus v);
std::string_view to_string(MetricStatus v);
std::string mark_name(const Mark& m);

std::optional<DataType> parse_data_type(std::string_view s);
/// Maps common grammar spellings ("circle", "scatter", "arc", "rect") onto mark types.
Mark normalize_mark(std::string_view s);
std::optional<Channel> parse_channel(std::string_view s);
std::optional<Aggregate> parse_aggregate(std::string_view s);
std::optional<ScaleType> parse_scale_type(std::string_view s);
std::optional<FilterOp> parse_filter_op(std::string_view s);
std::optional<SortDirection> parse_sort_direction(std::string_view s);
std::optional<Interaction> parse_interaction(std::string_view s);
std::optional<Ambiguity> parse_ambiguity(std::string_view s);
std::optional<ContextHandling> parse_context_handling(std::string_view s);
std::optional<ParseStatus> parse_parse_status(std::string_view s);
std::optional<MetricStatus> parse_metric_status(std::string_view s);

/// Accepts ISO-8601 dates and datetimes plus "YYYY-MM" and "YYYY".
/// Returns the canonical "YYYY[-MM[-DD[THH:MM:SS]]]" form; midnight times are dropped.
std::optional<std::string> parse_temporal(std::string_view s);

}  // namespace cvabench
