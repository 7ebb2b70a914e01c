#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvabench::stats {

inline constexpr const char* kNoVariance = "undefined: no variance";

/// A statistic that may be undefined (constant input); `note` says why.
struct StatResult {
  std::optional<double> value;
  std::string note;

  bool defined() const { return value.has_value(); }
  std::string to_string(int precision = 4) const;
};

struct RatingSeries {
  std::vector<std::string> item_ids;
  std::vector<double> values;
};

/// Linear-weighted Cohen's kappa over an ordered category scale.
/// Throws std::invalid_argument on length mismatch or values outside the scale.
StatResult weighted_kappa(const std::vector<double>& a, const std::vector<double>& b,
                          const std::vector<double>& categories);
/// Pairs the two series by item id; items missing from either side are dropped.
StatResult weighted_kappa(const RatingSeries& a, const RatingSeries& b, const std::vector<double>& categories);

/// 1-based ranks with ties sharing the average of the positions they span.
std::vector<double> average_ranks(const std::vector<double>& v);
double pearson(const std::vector<double>& x, const std::vector<double>& y);
StatResult spearman_rho(const std::vector<double>& x, const std::vector<double>& y);
StatResult spearman_rho(const RatingSeries& x, const RatingSeries& y);

/// One participant's ranks: model -> rank (lower is better, equal values tie).
using Ranking = std::map<std::string, double>;

struct PreferenceResult {
  std::map<std::string, double> scores;
  std::map<std::string, int> participants;  // how many participants ranked each model
  std::vector<std::string> notes;
};

PreferenceResult preference_scores(const std::vector<Ranking>& rankings, const std::vector<std::string>& models);

// CSV inputs

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF. Returns rows of cells.
std::vector<std::vector<std::string>> parse_csv(const std::string& content);
std::string csv_escape(const std::string& cell);

struct Rating {
  std::string item_id, rater_id, metric_id;
  double value = 0;
};

/// itemId, raterId, metricId, value. Throws std::runtime_error naming the line.
std::vector<Rating> load_ratings(const std::filesystem::path& path);

struct PreferenceRow {
  std::string participant_id, model;
  double rank = 0;
  std::optional<double> rating;  // carried along, not used in the scores
};

/// participantId, model, rank[, rating]
std::vector<PreferenceRow> load_preferences(const std::filesystem::path& path);
std::vector<Ranking> rankings_from_rows(const std::vector<PreferenceRow>& rows);

struct MetricStatRow {
  std::string metric_id;
  std::size_t items = 0;
  StatResult result;
};

/// Kappa between two raters per metric. When the raters are not named, the
/// first two rater ids in sorted order are used. An empty scale uses the
/// sorted union of observed values.
std::vector<MetricStatRow> kappa_by_metric(const std::vector<Rating>& ratings, std::vector<double> scale = {},
                                           std::string rater_a = "", std::string rater_b = "");

/// Spearman per metric between `reference` (usually the automated metric) and
/// the mean of every other rater on each item. With an empty reference the
/// first two raters are compared directly.
std::vector<MetricStatRow> spearman_by_metric(const std::vector<Rating>& ratings, const std::string& reference = "");

}  // namespace cvabench::stats
