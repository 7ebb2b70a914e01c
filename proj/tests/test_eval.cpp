#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <unistd.h>

#include "cvabench/eval.hpp"
#include "cvabench/stats.hpp"
#include "cvabench/viz_metrics.hpp"
#include "helpers.hpp"

using namespace cvabench;
using namespace cvabench::eval;

namespace {

struct Recorder {
  std::vector<Event> events;
  EventSink sink() {
    return [this](const Event& e) { events.push_back(e); };
  }
  int count(const std::string& type) const {
    return static_cast<int>(std::count_if(events.begin(), events.end(), [&](const Event& e) { return e.type == type; }));
  }
};

// Wraps the mock and keeps every candidate prompt by job-ish identity.
struct CapturingTransport : llm::Transport {
  std::shared_ptr<llm::MockTransport> inner;
  std::mutex mu;
  std::vector<std::pair<std::string, std::string>> prompts;  // model, prompt
  std::function<void(const ModelRef&)> before;
  llm::Completion send(const llm::ProviderConfig& p, const ModelRef& m, const llm::GenerationRequest& r,
                       const std::string& k) override {
    if (before) before(m);
    {
      std::lock_guard lock(mu);
      prompts.emplace_back(m.model_id, r.messages.front().content);
    }
    return inner->send(p, m, r, k);
  }
};

llm::Registry registry() { return llm::load_registry(testutil::data_path("registry.json")); }

llm::GatewayOptions opts(llm::ReplayMode mode, const std::filesystem::path& dir) {
  llm::GatewayOptions o;
  o.mode = mode;
  o.replay_dir = dir;
  o.sleeper = [](std::chrono::milliseconds) {};
  return o;
}

CellResult cell(const std::string& model, int prompt, const std::string& conv, int turn, int run,
                std::vector<std::pair<std::string, double>> scores, std::optional<double> raw_coherence = {}) {
  CellResult c;
  c.job = EvalJob{{"p", model, "", ""}, prompt, conv, turn, run, JobStatus::done};
  for (auto& [id, v] : scores) {
    MetricScore s;
    s.metric_id = id;
    s.value = v;
    (is_viz_metric(id) ? c.viz_scores : c.nl_scores).push_back(s);
  }
  if (raw_coherence) {
    MetricScore s;
    s.metric_id = "coherence";
    s.raw_judge_score = *raw_coherence;
    s.value = *raw_coherence * 20;
    c.nl_scores.push_back(s);
  }
  if (!c.viz_scores.empty()) c.overall_viz = metrics::overall_viz_score(c.viz_scores);
  c.overall_nl = nl::overall_nl_score(c.nl_scores);
  return c;
}

ExperimentConfig two_model_config() {
  ExperimentConfig c;
  c.models = {{"p", "A", "", ""}, {"p", "B", "", ""}};
  c.system_prompts = {"{datasource}{utterance}{output-schema}", "{datasource}{utterance}{output-schema}!"};
  return c;
}

}  // namespace

TEST(Plan, GridSizeAndOrdering) {
  auto in = testutil::grid_inputs();
  auto jobs = plan_experiment(in.config, in.suite);
  EXPECT_EQ(jobs.size(), 36u);
  std::set<std::string> keys;
  for (const auto& j : jobs) keys.insert(j.key());
  EXPECT_EQ(keys.size(), 36u);
  EXPECT_EQ(jobs[0].turn_index, 1);
  EXPECT_EQ(jobs[1].turn_index, 2);
  EXPECT_EQ(jobs[1].conversation_id, jobs[0].conversation_id);
  EXPECT_EQ(jobs, plan_experiment(in.config, in.suite));

  in.config.runs = 1;
  in.config.models.resize(1);
  in.config.system_prompts.resize(1);
  in.config.test_case_selection = "3";
  EXPECT_EQ(plan_experiment(in.config, in.suite).size(), 1u);
  in.config.runs = 6;
  EXPECT_THROW(plan_experiment(in.config, in.suite), ValidationError);
  in.config.runs = 3;
  in.config.models.clear();
  EXPECT_THROW(plan_experiment(in.config, in.suite), ValidationError);
}

TEST(Run, ReplayedGridEmitsOneEventPerCellThenAggregate) {
  auto dir = testutil::fresh_dir("grid");
  auto in = testutil::grid_inputs();
  auto mock = std::make_shared<llm::MockTransport>(testutil::reference_mock());
  {
    llm::Gateway rec(registry(), opts(llm::ReplayMode::record, dir), mock);
    run_experiment(in, rec, {"exp-rec", 4, {}});
  }
  long recorded = mock->calls();
  llm::Gateway gw(registry(), opts(llm::ReplayMode::replay, dir), mock);
  Recorder r;
  auto res = run_experiment(in, gw, {"exp-1", 4, {}}, r.sink());
  EXPECT_EQ(mock->calls(), recorded);
  EXPECT_EQ(r.count("cell"), 36);
  EXPECT_EQ(r.count("aggregate"), 1);
  EXPECT_EQ(r.events.size(), 37u);
  EXPECT_EQ(r.events.back().type, "aggregate");
  EXPECT_DOUBLE_EQ(r.events.back().progress(), 1.0);
  for (std::size_t i = 0; i + 1 < r.events.size(); ++i) EXPECT_FALSE(r.events[i].aggregate);
  ASSERT_TRUE(res.aggregate);
  EXPECT_FALSE(res.partial);
  ASSERT_TRUE(res.aggregate->recommendation);
  EXPECT_EQ(res.aggregate->configs.size(), 4u);
  for (const auto& c : res.cells) EXPECT_EQ(c.job.status, JobStatus::done) << c.error;
  std::filesystem::remove_all(dir);
}

TEST(Run, LaterTurnsSeeOnlyTheirOwnConversation) {
  auto in = testutil::grid_inputs(2);
  auto t = std::make_shared<CapturingTransport>();
  t->inner = std::make_shared<llm::MockTransport>(testutil::reference_mock());
  llm::Gateway gw(registry(), opts(llm::ReplayMode::off, {}), t);
  run_experiment(in, gw, {"exp-ctx", 4, {}});
  int turn2 = 0;
  for (const auto& [model, prompt] : t->prompts) {
    if (model == "mock-judge") continue;
    bool is_turn2 = prompt.find("Sort by Quantity") != std::string::npos;
    if (prompt.find("top accounts") != std::string::npos) {
      EXPECT_EQ(prompt.find("Quantity on y-axis"), std::string::npos);
      continue;
    }
    if (!is_turn2) {
      EXPECT_EQ(prompt.find("Turn 1 user"), std::string::npos);
      continue;
    }
    if (prompt.find("did not include") != std::string::npos) continue;
    ++turn2;
    EXPECT_NE(prompt.find("Turn 1 user: Quantity on y-axis and Region on x-axis"), std::string::npos);
    EXPECT_EQ(prompt.find("show me top accounts"), std::string::npos);
  }
  EXPECT_GE(turn2, 8);  // 2 models x 2 prompts x 2 runs
}

TEST(Run, StopYieldsPartialResultsWithoutRecommendation) {
  auto in = testutil::grid_inputs();
  auto mock = std::make_shared<llm::MockTransport>(testutil::reference_mock());
  llm::Gateway gw(registry(), opts(llm::ReplayMode::off, {}), mock);
  CancelToken stop;
  Recorder r;
  int cells = 0;
  EventSink sink = [&](const Event& e) {
    r.events.push_back(e);
    if (e.type == "cell" && ++cells == 10) stop.cancel();
  };
  auto res = run_experiment(in, gw, {"exp-stop", 2, {}}, sink, &stop);
  EXPECT_TRUE(res.partial);
  ASSERT_TRUE(res.aggregate);
  EXPECT_TRUE(res.aggregate->partial);
  EXPECT_FALSE(res.aggregate->recommendation);
  EXPECT_GT(r.count("cancelled"), 0);
  EXPECT_EQ(r.count("cell") + r.count("cancelled") + r.count("failure"), 36);
  EXPECT_LE(r.count("cell"), 12);  // at most one in-flight job per worker finishes after the stop

  auto out = testutil::fresh_dir("partial") / "results.json";
  std::filesystem::create_directories(out.parent_path());
  export_results(res, ExportFormat::json, out);
  auto back = load_results(out);
  EXPECT_TRUE(back.partial);
  EXPECT_EQ(back, res);
}

TEST(Run, ResumeReusesCheckpointWithoutNewProviderCalls) {
  auto in = testutil::grid_inputs();
  auto replay = testutil::fresh_dir("resume_replay");
  auto ckpt = testutil::fresh_dir("resume_ckpt");

  auto baseline = std::make_shared<llm::MockTransport>(testutil::reference_mock());
  {
    llm::Gateway gw(registry(), opts(llm::ReplayMode::off, {}), baseline);
    run_experiment(in, gw, {"exp-base", 4, {}});
  }

  auto mock = std::make_shared<llm::MockTransport>(testutil::reference_mock());
  CancelToken crash;
  int cells = 0;
  {
    llm::Gateway gw(registry(), opts(llm::ReplayMode::auto_, replay), mock);
    EventSink sink = [&](const Event& e) {
      if (e.type == "cell" && ++cells == 15) crash.cancel();
    };
    auto first = run_experiment(in, gw, {"exp-r", 3, ckpt}, sink, &crash);
    EXPECT_TRUE(first.partial);
  }
  long before = mock->calls();
  llm::Gateway gw(registry(), opts(llm::ReplayMode::auto_, replay), mock);
  Recorder r;
  auto res = run_experiment(in, gw, {"exp-r", 3, ckpt}, r.sink());
  EXPECT_FALSE(res.partial);
  EXPECT_EQ(r.count("cell"), 36);
  EXPECT_EQ(gw.stats().replay_hits, 0);
  EXPECT_EQ(mock->calls(), baseline->calls());
  EXPECT_GT(mock->calls() - before, 0);
  ASSERT_TRUE(res.aggregate);
  EXPECT_TRUE(res.aggregate->recommendation);
  std::filesystem::remove_all(replay);
  std::filesystem::remove_all(ckpt);
}

TEST(Run, ProviderOutageFailsOnlyThatModel) {
  auto in = testutil::grid_inputs(1);
  auto t = std::make_shared<CapturingTransport>();
  t->inner = std::make_shared<llm::MockTransport>(testutil::reference_mock());
  t->before = [](const ModelRef& m) {
    if (m.model_id == "mock-terse") throw llm::ProviderError(503, "unavailable");
  };
  llm::Gateway gw(registry(), opts(llm::ReplayMode::off, {}), t);
  Recorder r;
  auto res = run_experiment(in, gw, {"exp-out", 2, {}}, r.sink());
  EXPECT_EQ(r.count("failure"), 6);
  EXPECT_EQ(r.count("cell"), 6);
  ASSERT_TRUE(res.aggregate);
  EXPECT_EQ(res.aggregate->failed, 6);
  EXPECT_EQ(res.aggregate->configs.size(), 2u);
  EXPECT_EQ(res.aggregate->coverage_note, "6 of 12 cells completed, 6 failed");
  EXPECT_FALSE(res.partial);
}

TEST(Aggregate, JudgeRunsAverageRawBeforeScaling) {
  auto cfg = two_model_config();
  std::vector<CellResult> cells = {cell("A", 1, "c", 1, 1, {}, 3), cell("A", 1, "c", 1, 2, {}, 4),
                                   cell("A", 1, "c", 1, 3, {}, 5)};
  auto rep = aggregate(cells, {}, cfg, 3, false);
  EXPECT_DOUBLE_EQ(rep.configs[0].stats.metric_means.at("coherence"), 80);
}

TEST(Aggregate, LabelsPartitionCells) {
  TestCase tc;
  tc.conversation_id = "c";
  tc.turns.resize(2);
  tc.turns[0].labels.ambiguity = {Ambiguity::semantic};
  tc.turns[1].labels.ambiguity = {Ambiguity::pragmatic};
  auto cfg = two_model_config();
  auto rep = aggregate({cell("A", 1, "c", 1, 1, {{"sort_accuracy", 100}}), cell("A", 1, "c", 2, 1, {{"sort_accuracy", 0}})},
                       {tc}, cfg, 2, false);
  std::map<std::string, double> amb;
  int total = 0;
  for (const auto& b : rep.breakdowns) {
    if (b.dimension == "ambiguity") {
      amb[b.label] = b.stats.metric_means.at("sort_accuracy");
      total += b.stats.cells;
    }
  }
  EXPECT_EQ(amb.size(), 2u);
  EXPECT_EQ(amb["semantic"], 100);
  EXPECT_EQ(amb["pragmatic"], 0);
  EXPECT_EQ(total, 2);
}

TEST(Aggregate, RecommendationArgmaxAndTies) {
  auto cfg = two_model_config();
  auto rep = aggregate({cell("A", 1, "c", 1, 1, {{"sort_accuracy", 92}, {"factual_grounding", 92}}),
                        cell("A", 2, "c", 1, 1, {{"sort_accuracy", 85}, {"factual_grounding", 85}}),
                        cell("B", 1, "c", 1, 1, {{"sort_accuracy", 88}, {"factual_grounding", 88}})},
                       {}, cfg, 3, false);
  ASSERT_TRUE(rep.recommendation);
  EXPECT_EQ(rep.recommendation->model.model_id, "A");
  EXPECT_EQ(rep.recommendation->prompt_index, 1);
  EXPECT_NE(rep.recommendation->rationale.find("sort_accuracy +4.0"), std::string::npos);

  auto tie = aggregate({cell("A", 1, "c", 1, 1, {{"sort_accuracy", 90}, {"factual_grounding", 70}}),
                        cell("B", 1, "c", 1, 1, {{"sort_accuracy", 70}, {"factual_grounding", 90}})},
                       {}, cfg, 2, false);
  EXPECT_EQ(tie.recommendation->model.model_id, "A");
  EXPECT_NE(tie.recommendation->rationale.find("tied"), std::string::npos);

  cfg.models = {{"p", "B", "", ""}, {"p", "A", "", ""}};
  auto flat = aggregate({cell("A", 1, "c", 1, 1, {{"sort_accuracy", 50}}), cell("B", 1, "c", 1, 1, {{"sort_accuracy", 50}})},
                        {}, cfg, 2, false);
  EXPECT_EQ(flat.recommendation->model.model_id, "B");
  EXPECT_NE(flat.recommendation->rationale.find("configured model order"), std::string::npos);

  EXPECT_FALSE(aggregate({cell("A", 1, "c", 1, 1, {{"sort_accuracy", 50}})}, {}, cfg, 2, true).recommendation);
  EXPECT_THROW(aggregate({}, {}, cfg, 2, false), std::runtime_error);
}

TEST(Aggregate, OrderIndependent) {
  auto cfg = two_model_config();
  std::vector<CellResult> cells;
  std::mt19937 rng(3);
  for (const char* m : {"A", "B"}) {
    for (int turn = 1; turn <= 3; ++turn) {
      for (int run = 1; run <= 3; ++run) {
        cells.push_back(cell(m, 1, "c", turn, run,
                             {{"sort_accuracy", double(rng() % 101)}, {"field_similarity", (rng() % 1000) / 10.0},
                              {"factual_grounding", (rng() % 1000) / 7.0 / 2}},
                             double(1 + rng() % 5)));
      }
    }
  }
  auto base = aggregate(cells, {}, cfg, 18, false);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(cells.begin(), cells.end(), rng);
    EXPECT_EQ(aggregate(cells, {}, cfg, 18, false), base);
  }
}

TEST(Export, JsonRoundTripAndCsvRows) {
  Results r;
  r.experiment_id = "exp-x";
  r.config = two_model_config();
  r.cells = {cell("A", 1, "c,1", 1, 1, {{"sort_accuracy", 100.0 / 3}, {"factual_grounding", 0.1}}, 4),
             cell("B", 1, "c,1", 1, 1, {{"sort_accuracy", 12.5}})};
  MetricScore na;
  na.metric_id = "followup_relevance";
  na.status = MetricStatus::not_applicable;
  r.cells[1].nl_scores.push_back(na);
  r.cells.push_back(CellResult{EvalJob{{"p", "B", "", ""}, 2, "c,1", 1, 1, JobStatus::failed}, {}, {}, {}, {}, {}, {}, "boom"});
  r.aggregate = aggregate(r.cells, {}, r.config, 3, false);
  EXPECT_EQ(results_from_json(json::parse(results_to_json(r).dump())), r);

  auto rows = stats::parse_csv(results_csv(r));
  std::size_t expected_rows = 0;
  for (const auto& c : r.cells) expected_rows += c.viz_scores.size() + c.nl_scores.size() + c.nlg_scores.size();
  EXPECT_EQ(rows.size(), expected_rows + 1);
  EXPECT_EQ(rows[1][3], "c,1");
  EXPECT_EQ(rows.back()[7], "");

  EXPECT_THROW(export_results(r, ExportFormat::json, "/proc/definitely/not/here.json"), std::runtime_error);
}
