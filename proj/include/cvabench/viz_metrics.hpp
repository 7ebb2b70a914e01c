#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cvabench/model.hpp"

namespace cvabench::metrics {

/// Descriptor of the table a spec renders: grouping dimensions, measures with
/// their aggregation, and the computed rows.
struct ResultTable {
  bool computable = true;  // false when a referenced field does not resolve
  std::string problem;
  std::set<std::string> dimensions;           // resolved field names
  std::set<std::pair<std::string, Aggregate>> measures;  // ("" = count of records)
  std::vector<std::string> row_keys;          // sorted
  std::map<std::string, std::vector<double>> values;  // row key -> measure values (measure order)

  std::size_t row_count() const { return row_keys.size(); }
};

ResultTable compute_result_table(const VizSpec& spec, const Datasource& ds);

MetricScore score_data_fidelity(const ResultTable& expected, const ResultTable& actual);
MetricScore score_data_fidelity(const VizSpec& expected, const VizSpec& actual, const Datasource& ds);

MetricScore score_field_similarity(const VizSpec& expected, const VizSpec& actual, const Datasource& meta);

using ChartRecommendation = std::vector<MarkType>;

/// Rule-table recommender keyed by the multiset of field types.
ChartRecommendation show_me_recommend(const std::vector<DataType>& field_types);
/// Signature of the expected spec's axis fields (aggregated -> quantitative, ordinal -> nominal).
std::vector<DataType> chart_signature(const VizSpec& spec, const Datasource& meta);
MetricScore score_chart_similarity(const VizSpec& expected, const VizSpec& actual, const Datasource& meta);

/// True when the actual axis scale or zero baseline contradicts the expected one.
bool wrong_scale_or_baseline(const VizSpec& expected, const VizSpec& actual, const Datasource& meta);
MetricScore score_axis_accuracy(const VizSpec& expected, const VizSpec& actual, const Datasource& meta);

inline constexpr double kFilterFieldThreshold = 0.5;
MetricScore score_filter_accuracy(const VizSpec& expected, const VizSpec& actual, const Datasource& meta);

/// min(100, 100 * field_sim * direction_factor + (type_match ? 10 : 0))
double sort_score(double field_sim, double direction_factor, bool type_match);
double direction_factor(std::optional<SortDirection> expected, std::optional<SortDirection> actual);
MetricScore score_sort_accuracy(const VizSpec& expected, const VizSpec& actual, const Datasource& meta);

double best_practice_score(Channel channel, const EncodingBinding* expected,
                           const EncodingBinding* actual, const Datasource& meta,
                           MarkType actual_mark = MarkType::other);

struct ChannelScoreBreakdown {
  Channel channel = Channel::color;
  double presence = 0.0;
  double sem = 0.0;
  double type_ok = 0.0;
  double practice = 0.0;
  double s_c = 0.0;
};

std::vector<ChannelScoreBreakdown> encoding_breakdown(const VizSpec& expected, const VizSpec& actual,
                                                      const Datasource& meta);
MetricScore score_encoding_accuracy(const VizSpec& expected, const VizSpec& actual, const Datasource& meta);

/// Components of interactivity accuracy, each in [0, 100].
struct InteractivityBreakdown {
  double coverage = 0.0;
  double correctness = 0.0;
  double extras = 0.0;
  double redundancy_penalty = 0.0;
  double tooltip_score = 0.0;
  double inter_match = 0.0;
  double consistency = 0.0;
  double usability = 0.0;
  double total = 0.0;
};

double soft_jaccard(const std::set<Interaction>& expected, const std::set<Interaction>& actual);
InteractivityBreakdown interactivity_breakdown(const VizSpec& expected, const VizSpec& actual,
                                               const Datasource& meta);
MetricScore score_interactivity_accuracy(const VizSpec& expected, const VizSpec& actual,
                                         const Datasource& meta);

/// Runs one visualization metric by id.
MetricScore score_viz_metric(std::string_view metric_id, const VizSpec& expected, const VizSpec& actual,
                             const Datasource& meta);

/// Scores every selected visualization metric, taking the best value over the
/// expected candidates independently per metric. Without an actual spec the
/// metrics are unavailable, or 0 in strict mode.
std::vector<MetricScore> score_visualization(const std::vector<ExpectedResponse>& expected,
                                             const std::optional<VizSpec>& actual,
                                             const Datasource& meta,
                                             const std::vector<std::string>& metric_ids,
                                             bool strict = false);

/// Unweighted mean of the scored entries; throws std::invalid_argument when none are scored.
double overall_viz_score(const std::vector<MetricScore>& scores);

}  // namespace cvabench::metrics
