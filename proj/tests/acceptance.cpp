#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include "cvabench/cli.hpp"
#include "cvabench/stats.hpp"
#include "cvabench/viz_metrics.hpp"
#include "helpers.hpp"
#include "properties.hpp"

using namespace cvabench;
using testutil::data_path;
using testutil::spec;

namespace {

struct Check {
  std::vector<std::string> problems;

  void expect(bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s << what << ": got " << got << ", want " << want << " +/- " << tol;
    expect(std::abs(got - want) <= tol, s.str());
  }
  void exact(double got, double want, const std::string& what) { near(got, want, 0, what); }
};

class OfflineTransport : public llm::Transport {
 public:
  llm::Completion send(const llm::ProviderConfig&, const ModelRef& m, const llm::GenerationRequest&,
                       const std::string&) override {
    throw std::runtime_error("network call attempted for " + m.model_id);
  }
};

class CapturingTransport : public llm::Transport {
 public:
  explicit CapturingTransport(llm::MockModel m) : inner_(std::move(m)) {}
  llm::Completion send(const llm::ProviderConfig& p, const ModelRef& m, const llm::GenerationRequest& r,
                       const std::string& k) override {
    {
      std::lock_guard lock(mu);
      if (m.model_id == "mock-judge") judge_prompts.push_back(r.messages.back().content);
    }
    return inner_.send(p, m, r, k);
  }
  std::mutex mu;
  std::vector<std::string> judge_prompts;

 private:
  llm::MockTransport inner_;
};

llm::Registry registry() { return llm::load_registry(data_path("registry.json")); }

llm::GatewayOptions gateway_options(llm::ReplayMode mode, const std::filesystem::path& dir) {
  llm::GatewayOptions o;
  o.mode = mode;
  o.replay_dir = dir;
  o.sleeper = [](std::chrono::milliseconds) {};
  return o;
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

double score_of(const eval::CellResult& c, std::string_view id) {
  for (const auto& s : c.viz_scores) {
    if (s.metric_id == id) return s.value;
  }
  throw std::runtime_error("no " + std::string(id) + " score");
}

void reference_fixtures(Check& c) {
  eval::EvalInputs in;
  in.config.models = {{"local", "mock-scripted", "mock-scripted", "Mock scripted"}};
  in.config.system_prompts = {testutil::prompt_text("analyst_with_history.txt")};
  in.config.runs = 1;
  in.config.judge_model = ModelRef{"local", "mock-judge", "mock-judge", "Mock judge"};
  in.suite = testutil::reference_suite();
  in.datasources = testutil::datasources();
  in.rubrics = nl::load_rubrics(data_path("rubrics"));
  llm::Gateway gw(registry(), gateway_options(llm::ReplayMode::replay, data_path("replay-reference")),
                  std::make_shared<OfflineTransport>());
  auto res = eval::run_experiment(in, gw, {"acc-reference", 1, {}});
  c.expect(res.cells.size() == 5, "expected 5 cells");
  auto cell = [&](const std::string& conv, int turn) -> const eval::CellResult& {
    for (const auto& x : res.cells) {
      if (x.job.conversation_id == conv && x.job.turn_index == turn) {
        if (x.job.status != eval::JobStatus::done) throw std::runtime_error(conv + " failed: " + x.error);
        return x;
      }
    }
    throw std::runtime_error("missing cell " + conv);
  };
  namespace id = cvabench::metric_id;
  const auto& t1 = cell("1", 1);
  for (const auto& m : viz_metric_ids()) c.exact(score_of(t1, m), 100, "turn 1 " + std::string(m));
  const auto& t2 = cell("1", 2);
  c.exact(score_of(t2, id::sort_accuracy), 0, "turn 2 sort");
  c.exact(score_of(t2, id::filter_accuracy), 100, "turn 2 filter");
  c.near(score_of(t2, id::field_similarity), 100, 15, "turn 2 field");
  c.near(score_of(t2, id::axis_accuracy), 50, 15, "turn 2 axis");
  c.near(score_of(t2, id::encoding_accuracy), 100, 15, "turn 2 encoding");
  const auto& t3 = cell("2", 1);
  c.near(score_of(t3, id::field_similarity), 100, 15, "test 2 field");
  c.near(score_of(t3, id::axis_accuracy), 100, 15, "test 2 axis");
  c.near(score_of(t3, id::encoding_accuracy), 95, 15, "test 2 encoding");
  const auto& t4 = cell("3", 1);
  c.exact(score_of(t4, id::chart_type_similarity), 50, "test 3 chart");
  c.near(score_of(t4, id::field_similarity), 100, 15, "test 3 field");
  c.near(score_of(t4, id::axis_accuracy), 100, 15, "test 3 axis");
  c.near(score_of(t4, id::encoding_accuracy), 85, 15, "test 3 encoding");
  const auto& t5 = cell("4", 1);
  c.exact(score_of(t5, id::data_fidelity), 0, "test 4 fidelity");
  c.near(score_of(t5, id::field_similarity), 100, 15, "test 4 field");
  c.near(score_of(t5, id::axis_accuracy), 95, 15, "test 4 axis");
  c.near(score_of(t5, id::encoding_accuracy), 100, 15, "test 4 encoding");
}

void worked_examples(Check& c) {
  using namespace metrics;
  const auto& ds = testutil::superstore();
  auto ts = [](const char* mark) {
    return spec(std::string(R"({"mark":")") + mark +
                R"(","encoding":{"x":{"field":"Order Date"},"y":{"field":"Sales","aggregate":"sum"}}})");
  };
  c.exact(score_chart_similarity(ts("line"), ts("line"), ds).value, 100, "chart line/line");
  c.exact(score_chart_similarity(ts("line"), ts("area"), ds).value, 50, "chart line/area");
  auto cat = spec(R"({"mark":"bar","encoding":{"x":{"field":"Category"},"y":{"field":"Sales","aggregate":"sum"}}})");
  auto pie = cat;
  pie.mark = Mark{MarkType::pie, ""};
  c.exact(score_chart_similarity(cat, pie, ds).value, 50, "chart bar/pie");
  auto two = spec(R"({"mark":"point","encoding":{"x":{"field":"Sales"},"y":{"field":"Profit"}}})");
  auto table = two;
  table.mark = Mark{MarkType::table, ""};
  c.exact(score_chart_similarity(two, table, ds).value, 0, "chart point/table");

  auto desc = spec(R"({"mark":"bar","encoding":{},"sort":{"field":"Quantity","order":"descending"}})");
  auto none = spec(R"({"mark":"bar","encoding":{}})");
  c.exact(score_sort_accuracy(desc, none, ds).value, 0, "sort missing");
  auto sd = spec(R"({"mark":"bar","encoding":{},"sort":{"field":"Sales","order":"descending"}})");
  auto sa = spec(R"({"mark":"bar","encoding":{},"sort":{"field":"Sales","order":"ascending"}})");
  c.exact(score_sort_accuracy(sd, sa, ds).value, 60, "sort reversed");
  auto rev = spec(R"({"mark":"bar","encoding":{},"sort":{"field":"Revenue","order":"descending"}})");
  auto amt = spec(R"({"mark":"bar","encoding":{},"sort":{"field":"SalesAmount","order":"descending"}})");
  c.exact(score_sort_accuracy(rev, amt, ds).value, 100, "sort synonym field");

  Datasource meta;
  auto e = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"Year","op":"eq","values":[2023]}]})");
  auto a = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"Year","op":"eq","values":["2023"]},
    {"field":"Region","op":"eq","values":["West"]}]})");
  c.exact(score_filter_accuracy(e, a, meta).value, 60, "filter extra clause");
  auto west = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"Region","op":"eq","values":["West"]}]})");
  auto alias = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"SalesRegion","op":"eq","values":["west"]}]})");
  c.exact(score_filter_accuracy(west, alias, ds).value, 100, "filter alias");
  auto jan = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"Month","op":"eq","values":["Jan"]}]})");
  auto feb = spec(R"({"mark":"bar","encoding":{},"filters":[{"field":"Month","op":"eq","values":["February"]}]})");
  c.exact(score_filter_accuracy(jan, feb, meta).value, 0, "filter wrong value");

  auto plain = spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"},"y":{"field":"Quantity","aggregate":"sum"}}})");
  auto colored = spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"},"y":{"field":"Quantity","aggregate":"sum"},
    "color":{"field":"Region"}}})");
  c.near(score_encoding_accuracy(colored, plain, ds).value, 80, 10, "encoding dropped color");
  auto quant_color = spec(R"({"mark":"point","encoding":{"color":{"field":"Sales","scale":{"type":"ordinal"}}}})");
  auto quant_expected = spec(R"({"mark":"point","encoding":{"color":{"field":"Sales"}}})");
  c.near(encoding_breakdown(quant_expected, quant_color, ds)[0].s_c, 80, 10, "encoding ordinal color");
  auto size_sales = spec(R"({"mark":"point","encoding":{"size":{"field":"Sales"}}})");
  auto size_region = spec(R"({"mark":"point","encoding":{"size":{"field":"Region"}}})");
  c.near(encoding_breakdown(size_sales, size_region, ds)[4].s_c, 40, 10, "encoding size field");
  auto scatter = spec(R"({"mark":"point","encoding":{"x":{"field":"Sales"},"y":{"field":"Profit"}}})");
  auto scatter_opacity = spec(R"({"mark":"point","encoding":{"x":{"field":"Sales"},"y":{"field":"Profit"},
    "opacity":{"field":"Quantity"}}})");
  c.near(score_encoding_accuracy(scatter, scatter_opacity, ds).value, 80, 10, "encoding extra opacity");

  auto od = spec(R"({"mark":"line","encoding":{"x":{"field":"Order Date"},"y":{"field":"Sales","aggregate":"sum"}}})");
  auto sh = spec(R"({"mark":"line","encoding":{"x":{"field":"Ship Date"},"y":{"field":"Sales","aggregate":"sum"}}})");
  c.near(score_field_similarity(od, sh, ds).value, 87, 15, "field order/ship date");
  auto region = spec(R"({"mark":"bar","encoding":{"x":{"field":"Region"}}})");
  auto category = spec(R"({"mark":"bar","encoding":{"x":{"field":"Category"}}})");
  c.near(score_field_similarity(region, category, ds).value, 39, 15, "field region/category");
  auto y_only = spec(R"({"mark":"bar","encoding":{"y":{"field":"Quantity","aggregate":"sum"}}})");
  c.near(score_field_similarity(region, y_only, ds).value, 0, 15, "field missing axis");
}

void property_suite(Check& c) {
  auto failures = proptest::run_property_suite(testutil::superstore(), 1000, 20240611);
  for (const auto& f : failures) c.expect(false, f);
}

void grounding(Check& c) {
  nl::LexicalEmbedder emb;
  nl::LexicalContradictionChecker checker;
  const std::string expected = "Profit climbed 8% year-over-year";
  c.near(nl::score_factual_grounding(expected, "Profit up eight percent year-over-year", emb, checker).value, 100, 10,
         "paraphrase");
  c.near(nl::score_factual_grounding(expected, "Profit improved year-over-year", emb, checker).value, 70, 15,
         "vague");
  c.exact(nl::score_factual_grounding(expected, "Revenue grew 8%", emb, checker).value, 0, "wrong measure");
  c.expect(checker.contradicts(expected, "Revenue grew 8%") == std::optional<bool>(true),
           "contradiction fallback did not fire");
}

void judge_pipeline(Check& c) {
  auto in = testutil::grid_inputs(1);
  in.config.models.resize(1);
  auto t = std::make_shared<CapturingTransport>(testutil::reference_mock());
  llm::Gateway gw(registry(), gateway_options(llm::ReplayMode::off, {}), t);
  eval::run_experiment(in, gw, {"acc-judge", 2, {}});
  std::set<bool> orders;
  c.expect(!t->judge_prompts.empty(), "no judge prompts captured");
  for (const auto& p : t->judge_prompts) {
    c.expect(count_of(p, "<response_to_grade>") == 1, "judge prompt does not grade exactly one output");
    c.expect(count_of(p, "<reference_answer>") == 1, "judge prompt lacks a single reference");
    orders.insert(p.find("<response_to_grade>") < p.find("<reference_answer>"));
  }
  c.expect(orders.size() == 2, "judge prompts never swap response and reference order");

  auto rubric = nl::load_rubric(data_path("rubrics/insightfulness.json"));
  nl::JudgeContext ctx;
  ctx.utterance = "How did sales do?";
  ctx.expected_response = "Sales rose 8% with West leading.";
  for (int i = 0; i < 60; ++i) ctx.actual_response += "word" + std::to_string(i) + " ";
  std::mt19937_64 rng(1);
  auto p = nl::build_judge_prompt(rubric, ctx, rng);
  c.expect(p.find("word7 ...") != std::string::npos && p.find("word8") == std::string::npos,
           "long output was not trimmed to the reference length");

  c.exact(nl::scale_judge_score(1), 20, "scale 1");
  c.exact(nl::scale_judge_score(2), 40, "scale 2");
  c.exact(nl::scale_judge_score(5), 100, "scale 5");

  ExperimentConfig cfg;
  cfg.models = {{"p", "A", "", ""}};
  cfg.system_prompts = {"{utterance}"};
  std::vector<eval::CellResult> cells;
  int run = 0;
  for (double raw : {4.0, 5.0, 4.5}) {
    eval::CellResult cell;
    cell.job = eval::EvalJob{cfg.models[0], 1, "c", 1, ++run, eval::JobStatus::done};
    MetricScore s;
    s.metric_id = "coherence";
    s.raw_judge_score = raw;
    s.value = nl::scale_judge_score(raw);
    cell.nl_scores.push_back(s);
    cell.overall_nl = nl::overall_nl_score(cell.nl_scores);
    cells.push_back(cell);
  }
  auto rep = eval::aggregate(cells, {}, cfg, 3, false);
  c.exact(rep.configs.at(0).stats.metric_means.at("coherence"), 90, "replicated judge mean");
}

double kappa_oracle(const std::vector<int>& a, const std::vector<int>& b, int k) {
  double n = a.size(), dobs = 0, dexp = 0;
  for (std::size_t i = 0; i < a.size(); ++i) dobs += std::abs(a[i] - b[i]) / double(k - 1);
  for (int x : a)
    for (int y : b) dexp += std::abs(x - y) / double(k - 1);
  return 1 - (dobs / n) / (dexp / (n * n));
}

double rho_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r;
    for (double a : v) {
      int below = 0, same = 0;
      for (double b : v) {
        below += b < a;
        same += b == a;
      }
      r.push_back(1 + below + (same - 1) / 2.0);
    }
    return r;
  };
  auto rx = ranks(x), ry = ranks(y);
  double n = x.size(), sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += rx[i];
    sy += ry[i];
    sxx += rx[i] * rx[i];
    syy += ry[i] * ry[i];
    sxy += rx[i] * ry[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

void stats_oracles(Check& c) {
  using namespace stats;
  std::mt19937 rng(2024);
  int kappas = 0;
  while (kappas < 100) {
    int k = 2 + rng() % 4, n = 2 + rng() % 15;
    std::vector<int> a, b;
    std::vector<double> da, db, cats;
    for (int v = 1; v <= k; ++v) cats.push_back(v);
    for (int i = 0; i < n; ++i) {
      a.push_back(1 + rng() % k);
      b.push_back(rng() % 3 == 0 ? a.back() : 1 + int(rng() % k));
      da.push_back(a.back());
      db.push_back(b.back());
    }
    auto r = weighted_kappa(da, db, cats);
    if (!r.defined()) continue;
    c.near(*r.value, kappa_oracle(a, b, k), 1e-9, "kappa instance " + std::to_string(kappas));
    ++kappas;
  }
  int rhos = 0;
  while (rhos < 100) {
    int n = 3 + rng() % 12;
    std::vector<double> x, y;
    for (int i = 0; i < n; ++i) {
      x.push_back(rng() % 5);
      y.push_back(rng() % 6);
    }
    auto r = spearman_rho(x, y);
    if (!r.defined()) continue;
    c.near(*r.value, rho_oracle(x, y), 1e-9, "rho instance " + std::to_string(rhos));
    ++rhos;
  }
  c.exact(*weighted_kappa({1, 2, 3, 3, 5}, {1, 2, 3, 3, 5}, {1, 2, 3, 4, 5}).value, 1, "kappa(a,a)");
  std::vector<double> x{3, 1, 4, 1.5, 9, 2.6}, rev;
  for (double v : x) rev.push_back(-v);
  c.exact(*spearman_rho(x, rev).value, -1, "rho(x, reversed x)");
  auto pref = preference_scores({{{"A", 1}, {"B", 2}, {"C", 3}}, {{"A", 1}, {"C", 2}, {"B", 3}}}, {"A", "B", "C"});
  c.exact(pref.scores.at("A"), 1, "best preference");
  auto worst = preference_scores({{{"A", 1}, {"B", 2}, {"C", 3}}, {{"B", 1}, {"A", 2}, {"C", 3}}}, {"A", "B", "C"});
  c.exact(worst.scores.at("C"), 0, "worst preference");
}

void orchestrator(Check& c) {
  auto in = testutil::grid_inputs();
  c.expect(eval::plan_experiment(in.config, in.suite).size() == 36, "grid is not 2x2x3x3");
  auto store = testutil::fresh_dir("acc_grid");
  auto mock = std::make_shared<llm::MockTransport>(testutil::reference_mock());
  {
    llm::Gateway rec(registry(), gateway_options(llm::ReplayMode::record, store), mock);
    eval::run_experiment(in, rec, {"acc-rec", 4, {}});
  }
  long baseline_calls = mock->calls();

  {
    llm::Gateway gw(registry(), gateway_options(llm::ReplayMode::replay, store), std::make_shared<OfflineTransport>());
    std::vector<eval::Event> events;
    std::mutex mu;
    auto res = eval::run_experiment(in, gw, {"acc-grid", 4, {}}, [&](const eval::Event& e) {
      std::lock_guard lock(mu);
      events.push_back(e);
    });
    int cells = 0, aggs = 0;
    for (const auto& e : events) {
      cells += e.type == "cell";
      aggs += e.type == "aggregate";
    }
    c.expect(cells == 36, "cell events: " + std::to_string(cells));
    c.expect(aggs == 1 && events.back().type == "aggregate", "expected one terminal aggregate");
    c.expect(events.size() == 37, "event count: " + std::to_string(events.size()));
    c.expect(res.aggregate && res.aggregate->recommendation && !res.partial, "complete run lacks a recommendation");
  }

  {
    llm::Gateway gw(registry(), gateway_options(llm::ReplayMode::replay, store), std::make_shared<OfflineTransport>());
    eval::CancelToken stop;
    int cells = 0;
    auto res = eval::run_experiment(
        in, gw, {"acc-stop", 2, {}},
        [&](const eval::Event& e) {
          if (e.type == "cell" && ++cells == 10) stop.cancel();
        },
        &stop);
    auto out = store / "partial.json";
    eval::export_results(res, eval::ExportFormat::json, out);
    auto back = eval::load_results(out);
    c.expect(back.partial && back.aggregate && back.aggregate->partial, "stopped export not flagged partial");
    c.expect(back.aggregate && !back.aggregate->recommendation, "stopped export carries a recommendation");
    c.expect(back == res, "partial export does not round-trip");
  }

  {
    auto replay = testutil::fresh_dir("acc_resume_replay");
    auto ckpt = testutil::fresh_dir("acc_resume_ckpt");
    auto counted = std::make_shared<llm::MockTransport>(testutil::reference_mock());
    eval::CancelToken crash;
    int cells = 0;
    {
      llm::Gateway gw(registry(), gateway_options(llm::ReplayMode::auto_, replay), counted);
      eval::run_experiment(
          in, gw, {"acc-resume", 3, ckpt},
          [&](const eval::Event& e) {
            if (e.type == "cell" && ++cells == 15) crash.cancel();
          },
          &crash);
    }
    llm::Gateway gw(registry(), gateway_options(llm::ReplayMode::auto_, replay), counted);
    auto res = eval::run_experiment(in, gw, {"acc-resume", 3, ckpt});
    c.expect(!res.partial && res.cells.size() == 36, "resumed run incomplete");
    c.expect(gw.stats().replay_hits == 0,
             "resumed run re-requested " + std::to_string(gw.stats().replay_hits) + " recorded calls");
    c.expect(counted->calls() == baseline_calls, "provider calls " + std::to_string(counted->calls()) +
                                                      " vs single uninterrupted run " +
                                                      std::to_string(baseline_calls));
    std::filesystem::remove_all(replay);
    std::filesystem::remove_all(ckpt);
  }
  std::filesystem::remove_all(store);
}

void end_to_end_cli(Check& c) {
  auto dir = testutil::fresh_dir("acc_e2e");
  std::filesystem::create_directories(dir);
  auto out = (dir / "results.json").string();
  std::ostringstream so, se;
  int code = cli::run_cli({"cvabench", "run", "--testcases", data_path("suites/superstore.json"), "--datasource",
                           data_path("datasources/superstore.json") + "," + data_path("datasources/accounts.json"),
                           "--models", "local/mock-analyst,local/mock-terse", "--prompts",
                           data_path("prompts/analyst.txt") + "," + data_path("prompts/analyst_with_history.txt"),
                           "--judge", "local/mock-judge", "--replay", data_path("replay"), "--registry",
                           data_path("registry.json"), "--rubrics", data_path("rubrics"), "--out", out, "--quiet"},
                          so, se);
  c.expect(code == 0, "cvabench run exited " + std::to_string(code) + ": " + se.str());
  if (code != 0) return;
  auto results = eval::load_results(out);
  c.expect(eval::results_from_json(eval::results_to_json(results)) == results, "results JSON does not round-trip");
  if (!results.aggregate || !results.aggregate->recommendation) {
    c.expect(false, "no recommendation");
    return;
  }
  const eval::ConfigAggregate* best = nullptr;
  for (const auto& cfg : results.aggregate->configs) {
    if (cfg.stats.combined && (!best || *cfg.stats.combined > *best->stats.combined)) best = &cfg;
  }
  const auto& rec = *results.aggregate->recommendation;
  c.expect(best && best->model == rec.model && best->prompt_index == rec.prompt_index,
           "recommendation is not the combined-score argmax");
  auto log = dir / "recompute.txt";
  auto script = std::string(CVABENCH_SOURCE_DIR) + "/tools/recompute.py";
  int rc = std::system(("python3 " + script + " " + out + " > " + log.string() + " 2>&1").c_str());
  std::ifstream in(log);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  c.expect(rc == 0 && text.find("MISMATCH") == std::string::npos && text.find("MATCH") != std::string::npos,
           "independent recomputation disagrees:\n" + text);
  std::filesystem::remove_all(dir);
}

struct Criterion {
  std::string name;
  std::function<void(Check&)> body;
  double limit_seconds = 0;
};

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {"reference per-metric fixtures", reference_fixtures, 5},
      {"worked metric examples", worked_examples},
      {"metric property suite (1000 pairs)", property_suite, 30},
      {"factual grounding trio", grounding},
      {"judge pipeline", judge_pipeline},
      {"stats oracle equivalence", stats_oracles},
      {"orchestrator grid, stop, resume", orchestrator, 10},
      {"end-to-end offline cli", end_to_end_cli},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    auto start = std::chrono::steady_clock::now();
    try {
      cr.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("threw: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.limit_seconds > 0 && secs >= cr.limit_seconds) {
      check.expect(false, "took " + std::to_string(secs) + " s, limit " + std::to_string(cr.limit_seconds) + " s");
    }
    bool ok = check.problems.empty();
    failed += !ok;
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.2fs", secs);
    std::cout << (ok ? "PASS " : "FAIL ") << cr.name << " (" << timing << ")\n";
    for (const auto& p : check.problems) std::cout << "    " << p << "\n";
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed ? 1 : 0;
}
