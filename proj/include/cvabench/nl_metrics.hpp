#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cvabench/io.hpp"
#include "cvabench/model.hpp"

namespace cvabench::nl {

/// Either a sparse feature vector (offline embedder) or a dense one (remote providers).
struct Embedding {
  std::map<std::string, double> sparse;
  std::vector<double> dense;
};

double cosine(const Embedding& a, const Embedding& b);

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string name() const = 0;
  /// Throws EmbeddingError when the provider fails.
  virtual Embedding embed(std::string_view text) const = 0;
};

/// Canonical analysis tokens: lowercased, number words as digits, "%" as
/// "percent", direction verbs folded to increase/decrease, Porter-stemmed.
std::vector<std::string> analyze(std::string_view text);
bool is_stopword(std::string_view stemmed);

/// Deterministic stemmed TF-IDF bag of words with character-trigram backoff.
/// Without a fitted corpus every content term has idf 1 and numbers weigh 2.
class LexicalEmbedder : public Embedder {
 public:
  LexicalEmbedder() = default;
  explicit LexicalEmbedder(const std::vector<std::string>& corpus) { fit(corpus); }

  void fit(const std::vector<std::string>& corpus);
  std::string name() const override { return "lexical-tfidf"; }
  Embedding embed(std::string_view text) const override;

  static constexpr double kTrigramWeight = 0.25;

 private:
  std::map<std::string, double> idf_;
  double default_idf_ = 1.0;
};

class ContradictionChecker {
 public:
  virtual ~ContradictionChecker() = default;
  /// nullopt when the checker cannot decide (callers fall back).
  virtual std::optional<bool> contradicts(std::string_view expected, std::string_view actual) const = 0;
};

/// Measure mentions and movement direction extracted from prose.
struct Claim {
  std::string measure;  // canonical measure key
  int direction = 0;    // +1 up, -1 down, 0 none
};

/// Flags different measures, or opposite directions for the same measure.
/// Measure words come from the datasource's quantitative fields and aliases,
/// plus a small built-in business vocabulary.
class LexicalContradictionChecker : public ContradictionChecker {
 public:
  explicit LexicalContradictionChecker(const Datasource* meta = nullptr) : meta_(meta) {}
  std::optional<bool> contradicts(std::string_view expected, std::string_view actual) const override;
  std::vector<Claim> claims(std::string_view text) const;

 private:
  std::optional<std::string> measure_key(const std::vector<std::string>& tokens, std::size_t i,
                                         std::size_t& consumed) const;
  const Datasource* meta_;
};

/// Judge-backed yes/no check; returns nullopt on any failure so the lexical
/// checker can take over.
class JudgeContradictionChecker : public ContradictionChecker {
 public:
  explicit JudgeContradictionChecker(std::function<std::string(const std::string&)> judge)
      : judge_(std::move(judge)) {}
  std::optional<bool> contradicts(std::string_view expected, std::string_view actual) const override;

 private:
  std::function<std::string(const std::string&)> judge_;
};

/// Tries each checker in order until one decides.
class ChainedContradictionChecker : public ContradictionChecker {
 public:
  explicit ChainedContradictionChecker(std::vector<const ContradictionChecker*> chain) : chain_(std::move(chain)) {}
  std::optional<bool> contradicts(std::string_view expected, std::string_view actual) const override;

 private:
  std::vector<const ContradictionChecker*> chain_;
};

MetricScore score_factual_grounding(std::string_view expected_text, std::string_view actual_text,
                                    const Embedder& embedder, const ContradictionChecker& checker);

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

PRF nlg_prf(std::string_view reference, std::string_view candidate);
std::vector<MetricScore> score_nlg(std::string_view reference, std::string_view candidate);

// ---------------------------------------------------------------------------
// judge metrics

struct FewShotExample {
  std::string context;
  std::string response;
  int score = 3;
  std::string rationale;
};

struct JudgeRubric {
  std::string metric_id;
  std::string title;
  std::string instructions;
  std::map<int, std::string> anchors;  // score -> description
  std::vector<FewShotExample> few_shot;
  bool multi_turn_only = false;
};

JudgeRubric parse_rubric(const json& j, const std::string& origin = "");
JudgeRubric load_rubric(const std::filesystem::path& path);
/// One file per judge metric, named <metricId>.json.
std::map<std::string, JudgeRubric> load_rubrics(const std::filesystem::path& dir);

struct PriorTurn {
  std::string utterance;
  std::string response;
};

struct JudgeContext {
  std::string datasource_summary;
  std::vector<PriorTurn> prior_turns;
  std::string utterance;
  std::string expected_response;
  std::string actual_response;
  int turn_index = 1;
};

struct JudgeVerdict {
  double score = 0.0;  // 1-5
  std::string rationale;
  std::string raw_judge_output;
};

class JudgeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using JudgeFn = std::function<std::string(const std::string& prompt)>;

/// Truncates both texts to ceil(1.2 * shorter word count) words.
std::pair<std::string, std::string> equalize_lengths(std::string_view a, std::string_view b);

/// Builds a per-output rubric prompt. The reference and candidate blocks, and
/// the few-shot examples, are ordered by `rng`.
std::string build_judge_prompt(const JudgeRubric& rubric, const JudgeContext& ctx, std::mt19937_64& rng);

/// Parses {"score": 1-5, "rationale": "..."}; nullopt when malformed.
std::optional<JudgeVerdict> parse_judge_verdict(std::string_view raw);

/// Judges one output. Malformed verdicts are retried `retries` times with a
/// format reminder; then JudgeError is thrown.
JudgeVerdict judge_metric(const JudgeRubric& rubric, const JudgeContext& ctx, const JudgeFn& judge,
                          std::uint64_t seed, int retries = 2);

/// raw * 20 for raw in [1, 5]; throws std::out_of_range otherwise.
double scale_judge_score(double raw);

/// Averages raw 1-5 scores across replications and scales the mean.
double scale_mean_judge_score(const std::vector<double>& raws);

/// Builds the metric entry for a judge verdict, or not-applicable for
/// multi-turn rubrics on turn 1.
MetricScore judge_metric_score(const JudgeRubric& rubric, const JudgeContext& ctx, const JudgeFn& judge,
                               std::uint64_t seed, int retries = 2);

/// Unweighted mean of scored NL metrics (grounding and judge); nullopt when none apply.
std::optional<double> overall_nl_score(const std::vector<MetricScore>& scores);

std::string datasource_summary(const Datasource& ds);

}  // namespace cvabench::nl
