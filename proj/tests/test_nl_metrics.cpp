#include <gtest/gtest.h>

#include "cvabench/nl_metrics.hpp"
#include "helpers.hpp"

using namespace cvabench;
using namespace cvabench::nl;

namespace {

const char* kExpected = "Profit climbed 8% year-over-year";

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

JudgeRubric rubric(const std::string& id) {
  return load_rubric(testutil::data_path("rubrics/" + id + ".json"));
}

}  // namespace

TEST(FactualGrounding, Trio) {
  LexicalEmbedder emb;
  LexicalContradictionChecker checker;
  EXPECT_NEAR(score_factual_grounding(kExpected, "Profit up eight percent year-over-year", emb, checker).value, 100, 10);
  EXPECT_NEAR(score_factual_grounding(kExpected, "Profit improved year-over-year", emb, checker).value, 70, 15);
  EXPECT_EQ(score_factual_grounding(kExpected, "Revenue grew 8%", emb, checker).value, 0);
  EXPECT_EQ(checker.contradicts(kExpected, "Revenue grew 8%"), std::optional<bool>(true));
}

TEST(FactualGrounding, SelfSimilarityIsFull) {
  LexicalEmbedder emb;
  LexicalContradictionChecker checker;
  for (const char* t : {"Sales in the West rose sharply in Q4.", "Technology leads every region.", "x"}) {
    EXPECT_NEAR(score_factual_grounding(t, t, emb, checker).value, 100, 1e-9) << t;
  }
}

TEST(FactualGrounding, OppositeDirectionContradicts) {
  LexicalContradictionChecker checker;
  EXPECT_EQ(checker.contradicts("Sales rose in March", "Sales fell in March"), std::optional<bool>(true));
  EXPECT_EQ(checker.contradicts("Sales rose in March", "March sales increased"), std::optional<bool>(false));
}

TEST(FactualGrounding, DatasourceAliasesCanonicalizeMeasures) {
  LexicalContradictionChecker checker(&testutil::superstore());
  EXPECT_EQ(checker.contradicts("Sales amount grew", "Revenue grew"), std::optional<bool>(false));
  EXPECT_EQ(checker.contradicts("Earnings grew", "Revenue grew"), std::optional<bool>(true));
}

TEST(FactualGrounding, EmbedderFailureIsUnavailable) {
  struct Broken : Embedder {
    std::string name() const override { return "broken"; }
    Embedding embed(std::string_view) const override { throw EmbeddingError("offline"); }
  } broken;
  LexicalContradictionChecker checker;
  auto s = score_factual_grounding(kExpected, "Profit improved", broken, checker);
  EXPECT_EQ(s.status, MetricStatus::unavailable);
}

TEST(FactualGrounding, JudgeCheckerFallsBackWhenUndecided) {
  JudgeContradictionChecker judge([](const std::string&) -> std::string { return "not json"; });
  LexicalContradictionChecker lexical;
  ChainedContradictionChecker chain({&judge, &lexical});
  EXPECT_EQ(chain.contradicts(kExpected, "Revenue grew 8%"), std::optional<bool>(true));
  JudgeContradictionChecker says_no([](const std::string&) -> std::string { return R"({"contradiction": false})"; });
  ChainedContradictionChecker chain2({&says_no, &lexical});
  EXPECT_EQ(chain2.contradicts(kExpected, "Revenue grew 8%"), std::optional<bool>(false));
}

TEST(Nlg, PrecisionRecallF1) {
  auto same = nlg_prf("sales rose in q4", "sales rose in q4");
  EXPECT_EQ(same.f1, 1.0);
  auto none = nlg_prf("sales rose", "profit fell");
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.f1, 0.0);
  auto part = nlg_prf("sales rose in q4", "sales rose");
  EXPECT_DOUBLE_EQ(part.precision, 1.0);
  EXPECT_DOUBLE_EQ(part.recall, 0.5);
  EXPECT_NEAR(part.f1, 2.0 / 3.0, 1e-12);
  auto empty = nlg_prf("", "");
  EXPECT_EQ(empty.precision, 1.0);
  auto one = nlg_prf("", "text");
  EXPECT_EQ(one.recall, 0.0);
}

TEST(Judge, ScaleMapping) {
  EXPECT_EQ(scale_judge_score(1), 20);
  EXPECT_EQ(scale_judge_score(2), 40);
  EXPECT_EQ(scale_judge_score(5), 100);
  EXPECT_THROW(scale_judge_score(0), std::out_of_range);
  EXPECT_THROW(scale_judge_score(5.5), std::out_of_range);
  EXPECT_DOUBLE_EQ(scale_mean_judge_score({4, 5, 4.5}), 90);
  EXPECT_DOUBLE_EQ(scale_mean_judge_score({4, 5, 5}), 280.0 / 3.0);
}

TEST(Judge, RubricsShipWithExamples) {
  auto all = load_rubrics(testutil::data_path("rubrics"));
  ASSERT_EQ(all.size(), 4u);
  for (const auto& [id, r] : all) EXPECT_GE(r.few_shot.size(), 2u) << id;
  EXPECT_TRUE(all.at("followup_relevance").multi_turn_only);
  EXPECT_THROW(parse_rubric(json{{"metricId", "coherence"}, {"instructions", "x"}}), ValidationError);
}

TEST(Judge, PromptsArePerOutputEqualizedAndShuffled) {
  auto r = rubric("insightfulness");
  JudgeContext ctx;
  ctx.utterance = "How did sales do?";
  ctx.expected_response = "Sales rose 8% with West leading.";
  std::string long_answer;
  for (int i = 0; i < 60; ++i) long_answer += "word" + std::to_string(i) + " ";
  ctx.actual_response = long_answer;
  std::set<bool> orders;
  for (std::uint64_t seed = 0; seed < 32; ++seed) {
    std::mt19937_64 rng(seed);
    auto p = build_judge_prompt(r, ctx, rng);
    EXPECT_EQ(count_of(p, "<response_to_grade>"), 1u);
    EXPECT_EQ(count_of(p, "<reference_answer>"), 1u);
    // 6 reference words -> at most ceil(7.2) = 8 candidate words
    EXPECT_NE(p.find("word7 ..."), std::string::npos);
    EXPECT_EQ(p.find("word8"), std::string::npos);
    orders.insert(p.find("<response_to_grade>") < p.find("<reference_answer>"));
  }
  EXPECT_EQ(orders.size(), 2u);
}

TEST(Judge, RetriesMalformedOutput) {
  auto r = rubric("coherence");
  JudgeContext ctx{"", {}, "q", "Sales rose.", "Sales went up.", 1};
  int calls = 0;
  JudgeFn flaky = [&](const std::string&) -> std::string {
    return ++calls == 1 ? "I think it is good" : R"(```json
{"score": 4, "rationale": "Consistent."}
```)";
  };
  auto v = judge_metric(r, ctx, flaky, 7);
  EXPECT_EQ(v.score, 4);
  EXPECT_EQ(calls, 2);
  calls = 0;
  JudgeFn broken = [&](const std::string&) -> std::string {
    ++calls;
    return R"({"score": 9, "rationale": "x"})";
  };
  EXPECT_THROW(judge_metric(r, ctx, broken, 7, 2), JudgeError);
  EXPECT_EQ(calls, 3);
}

TEST(Judge, FollowupNotApplicableOnFirstTurn) {
  auto r = rubric("followup_relevance");
  JudgeContext ctx{"", {}, "q", "a", "b", 1};
  bool called = false;
  JudgeFn judge = [&](const std::string&) -> std::string {
    called = true;
    return R"({"score": 5, "rationale": "ok"})";
  };
  auto s = judge_metric_score(r, ctx, judge, 1);
  EXPECT_EQ(s.status, MetricStatus::not_applicable);
  EXPECT_FALSE(called);
  ctx.turn_index = 2;
  ctx.prior_turns.push_back({"first question", "first answer"});
  auto s2 = judge_metric_score(r, ctx, judge, 1);
  EXPECT_EQ(s2.value, 100);
  EXPECT_EQ(s2.raw_judge_score, 5);
}

TEST(Judge, VerdictParsing) {
  EXPECT_TRUE(parse_judge_verdict(R"({"score": "3", "rationale": "fine"})"));
  EXPECT_FALSE(parse_judge_verdict(R"({"score": 3.5, "rationale": "fine"})"));
  EXPECT_FALSE(parse_judge_verdict(R"({"score": 3, "rationale": ""})"));
  EXPECT_FALSE(parse_judge_verdict("score: 3"));
}

TEST(OverallNl, MeanOfApplicable) {
  std::vector<MetricScore> s;
  const char* ids[] = {"factual_grounding", "assumptions_disclosure", "insightfulness", "coherence"};
  double vals[] = {60, 20, 20, 90};
  for (int i = 0; i < 4; ++i) {
    MetricScore m;
    m.metric_id = ids[i];
    m.value = vals[i];
    s.push_back(m);
  }
  MetricScore na;
  na.metric_id = "followup_relevance";
  na.status = MetricStatus::not_applicable;
  s.push_back(na);
  EXPECT_DOUBLE_EQ(*overall_nl_score(s), 47.5);
  EXPECT_FALSE(overall_nl_score({na}).has_value());
}
