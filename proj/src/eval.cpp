#include "cvabench/eval.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "cvabench/stats.hpp"
#include "cvabench/text.hpp"
#include "cvabench/viz_metrics.hpp"

namespace cvabench::eval {

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::pending:
      return "pending";
    case JobStatus::running:
      return "running";
    case JobStatus::done:
      return "done";
    case JobStatus::failed:
      return "failed";
    case JobStatus::cancelled:
      return "cancelled";
  }
  return "pending";
}

std::optional<JobStatus> parse_job_status(std::string_view s) {
  for (auto v : {JobStatus::pending, JobStatus::running, JobStatus::done, JobStatus::failed, JobStatus::cancelled}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::string EvalJob::key() const {
  return model.key() + "|p" + std::to_string(prompt_index) + "|" + conversation_id + "|t" +
         std::to_string(turn_index) + "|r" + std::to_string(run_index);
}

std::vector<std::string> selected_metrics(const ExperimentConfig& config) {
  if (config.metric_selection.empty()) return all_metric_ids();
  std::vector<std::string> out;
  for (const auto& id : all_metric_ids()) {
    if (config.metric_selection.count(id)) out.push_back(id);
  }
  return out;
}

std::vector<EvalJob> plan_experiment(const ExperimentConfig& config, const std::vector<TestCase>& suite) {
  std::vector<Violation> v;
  auto err = [&](const std::string& path, const std::string& rule, const std::string& msg) {
    v.push_back({Severity::error, "", path, rule, msg});
  };
  if (config.models.empty()) err("models", "non-empty", "select at least one model");
  if (config.system_prompts.empty()) err("systemPrompts", "non-empty", "provide at least one system prompt");
  if (config.runs < kMinRuns || config.runs > kMaxRuns) {
    err("runs", "range", "runs must be between 1 and 5, got " + std::to_string(config.runs));
  }
  for (const auto& id : config.metric_selection) {
    const auto& all = all_metric_ids();
    if (std::find(all.begin(), all.end(), id) == all.end()) err("metrics", "enum", "unknown metric id \"" + id + "\"");
  }
  auto cases = select_test_cases(suite, config.test_case_selection);
  if (cases.empty()) err("testCaseSelection", "non-empty", "the selection matches no test case");
  if (!v.empty()) throw ValidationError(v);

  std::vector<EvalJob> jobs;
  for (const auto& m : config.models) {
    for (int p = 1; p <= static_cast<int>(config.system_prompts.size()); ++p) {
      for (const auto& tc : cases) {
        for (int r = 1; r <= config.runs; ++r) {
          for (int t = 1; t <= static_cast<int>(tc.turns.size()); ++t) {
            jobs.push_back(EvalJob{m, p, tc.conversation_id, t, r, JobStatus::pending});
          }
        }
      }
    }
  }
  return jobs;
}

// ---------------------------------------------------------------------------
// aggregation

namespace {

std::string config_key(const ModelRef& m, int prompt) { return m.key() + "|p" + std::to_string(prompt); }

std::string position_key(const EvalJob& j) {
  return config_key(j.model, j.prompt_index) + "|" + j.conversation_id + "|t" + std::to_string(j.turn_index);
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double d : v) s += d;
  return s / static_cast<double>(v.size());
}

// Accumulates per-position values (runs) and reduces them to group means.
struct Accumulator {
  // position -> metric -> run values (raw 1-5 for judge metrics)
  std::map<std::string, std::map<std::string, std::vector<double>>> metrics;
  std::map<std::string, std::vector<double>> viz, nl;
  std::set<std::string> cell_keys;

  void add(const CellResult& c) {
    auto pos = position_key(c.job);
    cell_keys.insert(c.job.key());
    auto take = [&](const std::vector<MetricScore>& scores) {
      for (const auto& s : scores) {
        if (!s.scored()) continue;
        metrics[pos][s.metric_id].push_back(s.raw_judge_score ? *s.raw_judge_score : s.value);
      }
    };
    take(c.viz_scores);
    take(c.nl_scores);
    take(c.nlg_scores);
    if (c.overall_viz) viz[pos].push_back(*c.overall_viz);
    if (c.overall_nl) nl[pos].push_back(*c.overall_nl);
  }

  GroupStats reduce() const {
    GroupStats g;
    g.cells = static_cast<int>(cell_keys.size());
    std::map<std::string, std::vector<double>> per_metric;
    for (const auto& [pos, ms] : metrics) {
      for (const auto& [id, runs] : ms) {
        double m = mean(runs);
        per_metric[id].push_back(is_judge_metric(id) ? nl::scale_judge_score(m) : m);
      }
    }
    for (const auto& [id, vals] : per_metric) {
      g.metric_means[id] = mean(vals);
      g.metric_coverage[id] = static_cast<int>(vals.size());
    }
    auto overall = [](const std::map<std::string, std::vector<double>>& by_pos) -> std::optional<double> {
      std::vector<double> cell_means;
      for (const auto& [_, runs] : by_pos) cell_means.push_back(mean(runs));
      if (cell_means.empty()) return std::nullopt;
      return mean(cell_means);
    };
    g.overall_viz = overall(viz);
    g.overall_nl = overall(nl);
    if (g.overall_viz && g.overall_nl) g.combined = (*g.overall_viz + *g.overall_nl) / 2.0;
    else if (g.overall_viz) g.combined = g.overall_viz;
    else g.combined = g.overall_nl;
    return g;
  }
};

std::string fmt(double v, int precision = 1) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << v;
  return os.str();
}

std::string config_label(const ModelRef& m, int prompt) {
  return (m.display_name.empty() ? m.key() : m.display_name) + " with prompt " + std::to_string(prompt);
}

}  // namespace

GroupStats summarize(const std::vector<CellResult>& cells) {
  std::vector<const CellResult*> done;
  for (const auto& c : cells) {
    if (c.job.status == JobStatus::done) done.push_back(&c);
  }
  std::sort(done.begin(), done.end(), [](auto* a, auto* b) { return a->job.key() < b->job.key(); });
  Accumulator acc;
  for (const auto* c : done) acc.add(*c);
  return acc.reduce();
}

AggregateReport aggregate(const std::vector<CellResult>& cells, const std::vector<TestCase>& suite,
                          const ExperimentConfig& config, int planned, bool partial) {
  std::vector<const CellResult*> done;
  AggregateReport rep;
  for (const auto& c : cells) {
    if (c.job.status == JobStatus::done) done.push_back(&c);
    else if (c.job.status == JobStatus::failed) rep.failed++;
    else if (c.job.status == JobStatus::cancelled) rep.cancelled++;
  }
  if (done.empty()) throw std::runtime_error("no completed cells to aggregate");
  std::sort(done.begin(), done.end(), [](auto* a, auto* b) { return a->job.key() < b->job.key(); });
  rep.planned = planned;
  rep.completed = static_cast<int>(done.size());
  rep.partial = partial;

  std::map<std::string, const TurnLabels*> labels;
  for (const auto& tc : suite) {
    for (std::size_t t = 0; t < tc.turns.size(); ++t) {
      labels[tc.conversation_id + "|t" + std::to_string(t + 1)] = &tc.turns[t].labels;
    }
  }

  std::map<std::string, Accumulator> per_config;
  std::map<std::string, ModelRef> config_models;
  std::map<std::string, int> config_prompts;
  // (dimension, label, config) -> accumulator
  std::map<std::tuple<std::string, std::string, std::string>, Accumulator> per_label;
  for (const auto* c : done) {
    auto ck = config_key(c->job.model, c->job.prompt_index);
    per_config[ck].add(*c);
    config_models[ck] = c->job.model;
    config_prompts[ck] = c->job.prompt_index;
    auto it = labels.find(c->job.conversation_id + "|t" + std::to_string(c->job.turn_index));
    std::vector<std::pair<std::string, std::string>> tags;
    tags.emplace_back("turnIndex", std::to_string(c->job.turn_index));
    if (it != labels.end()) {
      const auto& l = *it->second;
      tags.emplace_back("chartType", l.chart_type.empty() ? "unlabeled" : l.chart_type);
      if (l.ambiguity.empty()) tags.emplace_back("ambiguity", "none");
      for (auto a : l.ambiguity) tags.emplace_back("ambiguity", std::string(to_string(a)));
      if (l.context_handling.empty()) tags.emplace_back("contextHandling", "none");
      for (auto h : l.context_handling) tags.emplace_back("contextHandling", std::string(to_string(h)));
    }
    for (const auto& [dim, label] : tags) per_label[{dim, label, ck}].add(*c);
  }

  // Config order follows the experiment config so reports read the same way every time.
  std::vector<std::string> order;
  for (const auto& m : config.models) {
    for (int p = 1; p <= static_cast<int>(config.system_prompts.size()); ++p) {
      auto ck = config_key(m, p);
      if (per_config.count(ck) && std::find(order.begin(), order.end(), ck) == order.end()) order.push_back(ck);
    }
  }
  for (const auto& [ck, _] : per_config) {
    if (std::find(order.begin(), order.end(), ck) == order.end()) order.push_back(ck);
  }
  for (const auto& ck : order) rep.configs.push_back({config_models[ck], config_prompts[ck], per_config[ck].reduce()});
  for (const auto& [k, acc] : per_label) {
    const auto& [dim, label, ck] = k;
    rep.breakdowns.push_back({dim, label, config_models[ck], config_prompts[ck], acc.reduce()});
  }
  std::stable_sort(rep.breakdowns.begin(), rep.breakdowns.end(), [&](const auto& a, const auto& b) {
    auto ia = std::find(order.begin(), order.end(), config_key(a.model, a.prompt_index)) - order.begin();
    auto ib = std::find(order.begin(), order.end(), config_key(b.model, b.prompt_index)) - order.begin();
    if (a.dimension != b.dimension) return a.dimension < b.dimension;
    if (a.dimension == "turnIndex" && a.label != b.label) return std::stoi(a.label) < std::stoi(b.label);
    if (a.label != b.label) return a.label < b.label;
    return ia < ib;
  });

  std::ostringstream note;
  note << rep.completed << " of " << planned << " cells completed";
  if (rep.failed) note << ", " << rep.failed << " failed";
  if (rep.cancelled) note << ", " << rep.cancelled << " cancelled";
  rep.coverage_note = note.str();
  if (!partial) rep.recommendation = recommend_best(rep, config);
  return rep;
}

std::optional<Recommendation> recommend_best(const AggregateReport& report, const ExperimentConfig& config) {
  if (report.partial) return std::nullopt;
  std::vector<const ConfigAggregate*> ranked;
  for (const auto& c : report.configs) {
    if (c.stats.combined) ranked.push_back(&c);
  }
  if (ranked.empty()) return std::nullopt;
  auto model_pos = [&](const ModelRef& m) {
    for (std::size_t i = 0; i < config.models.size(); ++i) {
      if (config.models[i].key() == m.key()) return i;
    }
    return config.models.size();
  };
  std::stable_sort(ranked.begin(), ranked.end(), [&](const ConfigAggregate* a, const ConfigAggregate* b) {
    if (*a->stats.combined != *b->stats.combined) return *a->stats.combined > *b->stats.combined;
    double va = a->stats.overall_viz.value_or(-1), vb = b->stats.overall_viz.value_or(-1);
    if (va != vb) return va > vb;
    if (model_pos(a->model) != model_pos(b->model)) return model_pos(a->model) < model_pos(b->model);
    return a->prompt_index < b->prompt_index;
  });
  const auto* best = ranked.front();
  Recommendation rec{best->model, best->prompt_index, *best->stats.combined, ""};
  std::ostringstream why;
  why << config_label(best->model, best->prompt_index) << " has the highest combined score ("
      << fmt(*best->stats.combined) << ")";
  if (ranked.size() == 1) {
    why << "; it was the only model-prompt pair evaluated.";
    rec.rationale = why.str();
    return rec;
  }
  const auto* second = ranked[1];
  double gap = *best->stats.combined - *second->stats.combined;
  if (gap == 0) {
    why << ", tied with " << config_label(second->model, second->prompt_index) << "; ";
    double vgap = best->stats.overall_viz.value_or(-1) - second->stats.overall_viz.value_or(-1);
    why << (vgap > 0 ? "chosen for its higher visualization mean" : "chosen by configured model order");
  } else {
    why << ", " << fmt(gap) << " points ahead of " << config_label(second->model, second->prompt_index);
  }
  std::vector<std::pair<double, std::string>> gaps;
  for (const auto& [id, v] : best->stats.metric_means) {
    auto it = second->stats.metric_means.find(id);
    if (it != second->stats.metric_means.end() && v - it->second > 0) gaps.emplace_back(v - it->second, id);
  }
  std::stable_sort(gaps.begin(), gaps.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  if (!gaps.empty()) {
    why << ". Largest leads: ";
    for (std::size_t i = 0; i < gaps.size() && i < 2; ++i) {
      if (i) why << ", ";
      why << gaps[i].second << " +" << fmt(gaps[i].first);
    }
  }
  why << ".";
  rec.rationale = why.str();
  return rec;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

json scores_json(const std::vector<MetricScore>& v) {
  json a = json::array();
  for (const auto& s : v) a.push_back(metric_score_to_json(s));
  return a;
}

std::vector<MetricScore> scores_from(const json& j, const char* key) {
  std::vector<MetricScore> out;
  if (auto it = j.find(key); it != j.end() && it->is_array()) {
    for (const auto& s : *it) out.push_back(metric_score_from_json(s));
  }
  return out;
}

json opt_num(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> num_from(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

json group_json(const GroupStats& g) {
  return {{"metricMeans", g.metric_means},
          {"metricCoverage", g.metric_coverage},
          {"overallViz", opt_num(g.overall_viz)},
          {"overallNl", opt_num(g.overall_nl)},
          {"combined", opt_num(g.combined)},
          {"cells", g.cells}};
}

GroupStats group_from(const json& j) {
  GroupStats g;
  g.metric_means = j.value("metricMeans", std::map<std::string, double>{});
  g.metric_coverage = j.value("metricCoverage", std::map<std::string, int>{});
  g.overall_viz = num_from(j, "overallViz");
  g.overall_nl = num_from(j, "overallNl");
  g.combined = num_from(j, "combined");
  g.cells = j.value("cells", 0);
  return g;
}

}  // namespace

json cell_result_to_json(const CellResult& c) {
  json j = {{"model", model_ref_to_json(c.job.model)},
            {"promptIndex", c.job.prompt_index},
            {"conversationId", c.job.conversation_id},
            {"turnIndex", c.job.turn_index},
            {"runIndex", c.job.run_index},
            {"status", to_string(c.job.status)},
            {"response", c.response ? model_response_to_json(*c.response) : json(nullptr)},
            {"vizScores", scores_json(c.viz_scores)},
            {"nlScores", scores_json(c.nl_scores)},
            {"nlgScores", scores_json(c.nlg_scores)},
            {"overallViz", opt_num(c.overall_viz)},
            {"overallNl", opt_num(c.overall_nl)}};
  if (!c.error.empty()) j["error"] = c.error;
  return j;
}

CellResult cell_result_from_json(const json& j) {
  CellResult c;
  c.job.model = model_ref_from_json(j.at("model"));
  c.job.prompt_index = j.value("promptIndex", 1);
  c.job.conversation_id = j.value("conversationId", "");
  c.job.turn_index = j.value("turnIndex", 1);
  c.job.run_index = j.value("runIndex", 1);
  c.job.status = parse_job_status(j.value("status", "pending")).value_or(JobStatus::pending);
  if (auto r = j.find("response"); r != j.end() && !r->is_null()) c.response = model_response_from_json(*r);
  c.viz_scores = scores_from(j, "vizScores");
  c.nl_scores = scores_from(j, "nlScores");
  c.nlg_scores = scores_from(j, "nlgScores");
  c.overall_viz = num_from(j, "overallViz");
  c.overall_nl = num_from(j, "overallNl");
  c.error = j.value("error", "");
  return c;
}

json aggregate_to_json(const AggregateReport& a) {
  json configs = json::array();
  for (const auto& c : a.configs) {
    configs.push_back({{"model", model_ref_to_json(c.model)}, {"promptIndex", c.prompt_index}, {"stats", group_json(c.stats)}});
  }
  json breakdowns = json::array();
  for (const auto& b : a.breakdowns) {
    breakdowns.push_back({{"dimension", b.dimension},
                          {"label", b.label},
                          {"model", model_ref_to_json(b.model)},
                          {"promptIndex", b.prompt_index},
                          {"stats", group_json(b.stats)}});
  }
  json rec = nullptr;
  if (a.recommendation) {
    rec = {{"model", model_ref_to_json(a.recommendation->model)},
           {"promptIndex", a.recommendation->prompt_index},
           {"combined", a.recommendation->combined},
           {"rationale", a.recommendation->rationale}};
  }
  return {{"configs", configs},     {"breakdowns", breakdowns}, {"recommendation", rec},
          {"partial", a.partial},   {"planned", a.planned},     {"completed", a.completed},
          {"failed", a.failed},     {"cancelled", a.cancelled}, {"coverageNote", a.coverage_note}};
}

AggregateReport aggregate_from_json(const json& j) {
  AggregateReport a;
  for (const auto& c : j.value("configs", json::array())) {
    a.configs.push_back({model_ref_from_json(c.at("model")), c.value("promptIndex", 1), group_from(c.at("stats"))});
  }
  for (const auto& b : j.value("breakdowns", json::array())) {
    a.breakdowns.push_back({b.value("dimension", ""), b.value("label", ""), model_ref_from_json(b.at("model")),
                            b.value("promptIndex", 1), group_from(b.at("stats"))});
  }
  if (auto r = j.find("recommendation"); r != j.end() && !r->is_null()) {
    a.recommendation = Recommendation{model_ref_from_json(r->at("model")), r->value("promptIndex", 1),
                                      r->value("combined", 0.0), r->value("rationale", "")};
  }
  a.partial = j.value("partial", false);
  a.planned = j.value("planned", 0);
  a.completed = j.value("completed", 0);
  a.failed = j.value("failed", 0);
  a.cancelled = j.value("cancelled", 0);
  a.coverage_note = j.value("coverageNote", "");
  return a;
}

json results_to_json(const Results& r) {
  json cells = json::array();
  for (const auto& c : r.cells) cells.push_back(cell_result_to_json(c));
  return {{"experimentId", r.experiment_id},
          {"config", experiment_config_to_json(r.config)},
          {"cells", cells},
          {"aggregate", r.aggregate ? aggregate_to_json(*r.aggregate) : json(nullptr)},
          {"partial", r.partial}};
}

Results results_from_json(const json& j) {
  Results r;
  r.experiment_id = j.value("experimentId", "");
  r.config = experiment_config_from_json(j.at("config"));
  for (const auto& c : j.value("cells", json::array())) r.cells.push_back(cell_result_from_json(c));
  if (auto a = j.find("aggregate"); a != j.end() && !a->is_null()) r.aggregate = aggregate_from_json(*a);
  r.partial = j.value("partial", false);
  return r;
}

Results load_results(const std::filesystem::path& path) {
  auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw std::runtime_error(path.string() + ": not a results JSON file");
  try {
    return results_from_json(j);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": malformed results file: " + e.what());
  }
}

std::string results_csv(const Results& r) {
  using stats::csv_escape;
  std::ostringstream os;
  os << "experimentId,model,promptIndex,conversationId,turnIndex,runIndex,metricId,value\n";
  for (const auto& c : r.cells) {
    for (const auto* group : {&c.viz_scores, &c.nl_scores, &c.nlg_scores}) {
      for (const auto& s : *group) {
        os << csv_escape(r.experiment_id) << ',' << csv_escape(c.job.model.key()) << ',' << c.job.prompt_index << ','
           << csv_escape(c.job.conversation_id) << ',' << c.job.turn_index << ',' << c.job.run_index << ','
           << s.metric_id << ',';
        if (s.scored()) os << json(s.value).dump();
        os << '\n';
      }
    }
  }
  return os.str();
}

void export_results(const Results& r, ExportFormat format, const std::filesystem::path& path) {
  std::string body = format == ExportFormat::json ? results_to_json(r).dump(2) + "\n" : results_csv(r);
  try {
    write_file_atomic(path, body);
  } catch (const std::exception& e) {
    throw std::runtime_error("cannot write " + path.string() + ": " + e.what());
  }
}

json Event::to_json() const {
  json j = {{"type", type}, {"completed", completed}, {"total", total}, {"progress", progress()}};
  if (cell) j["cell"] = cell_result_to_json(*cell);
  if (aggregate) j["aggregate"] = aggregate_to_json(*aggregate);
  if (type == "aggregate") j["partial"] = partial;
  return j;
}

// ---------------------------------------------------------------------------
// execution

std::string new_experiment_id() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%S", &tm);
  std::random_device rd;
  std::ostringstream os;
  os << "exp-" << buf << "-" << std::hex << (rd() & 0xffffff);
  return os.str();
}

std::vector<CellResult> load_checkpoint(const std::filesystem::path& dir) {
  std::vector<CellResult> out;
  std::ifstream in(dir / "cells.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;  // torn write from a crash
    try {
      auto c = cell_result_from_json(j);
      if (c.job.status == JobStatus::done) out.push_back(std::move(c));
    } catch (const json::exception&) {
    }
  }
  return out;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct Sequence {
  std::vector<std::size_t> jobs;  // indexes into the plan, in turn order
};

class Runner {
 public:
  Runner(const EvalInputs& in, llm::Gateway& gw, const RunOptions& opt, const EventSink& sink, const CancelToken* cancel)
      : in_(in), gw_(gw), opt_(opt), sink_(sink), cancel_(cancel) {}

  Results run() {
    Results res;
    res.experiment_id = opt_.experiment_id.empty() ? new_experiment_id() : opt_.experiment_id;
    res.config = in_.config;
    plan_ = plan_experiment(in_.config, in_.suite);
    metrics_ = selected_metrics(in_.config);
    for (const auto& tc : in_.suite) cases_[tc.conversation_id] = &tc;
    results_.resize(plan_.size());
    filled_.assign(plan_.size(), 0);

    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < plan_.size(); ++i) index[plan_[i].key()] = i;
    if (!opt_.checkpoint_dir.empty()) {
      std::filesystem::create_directories(opt_.checkpoint_dir);
      for (auto& c : load_checkpoint(opt_.checkpoint_dir)) {
        auto it = index.find(c.job.key());
        if (it == index.end() || filled_[it->second]) continue;
        results_[it->second] = std::move(c);
        filled_[it->second] = 1;
      }
      checkpoint_.open(opt_.checkpoint_dir / "cells.jsonl", std::ios::app);
      if (!checkpoint_) throw std::runtime_error("cannot write checkpoint in " + opt_.checkpoint_dir.string());
    }

    std::map<std::string, std::size_t> seq_index;
    for (std::size_t i = 0; i < plan_.size(); ++i) {
      const auto& j = plan_[i];
      auto k = config_key(j.model, j.prompt_index) + "|" + j.conversation_id + "|r" + std::to_string(j.run_index);
      auto [it, fresh] = seq_index.emplace(k, sequences_.size());
      if (fresh) sequences_.emplace_back();
      sequences_[it->second].jobs.push_back(i);
    }

    // Cells restored from the checkpoint count as completed and are replayed to the sink first.
    for (std::size_t i = 0; i < plan_.size(); ++i) {
      if (filled_[i]) emit("cell", i);
    }

    int workers = std::max(1, std::min<int>(opt_.workers, static_cast<int>(sequences_.size())));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back([this] { work(); });
    for (auto& t : pool) t.join();

    bool partial = false;
    for (const auto& c : results_) partial = partial || c.job.status == JobStatus::cancelled;
    res.cells = results_;
    res.partial = partial;
    Event end;
    end.type = "aggregate";
    end.partial = partial;
    end.total = static_cast<int>(plan_.size());
    end.completed = completed_;
    try {
      res.aggregate = aggregate(res.cells, in_.suite, in_.config, static_cast<int>(plan_.size()), partial);
      end.aggregate = res.aggregate;
    } catch (const std::runtime_error&) {
    }
    if (sink_) sink_(end);
    return res;
  }

 private:
  void work() {
    for (;;) {
      std::size_t s;
      {
        std::lock_guard lock(mu_);
        if (next_seq_ >= sequences_.size()) return;
        s = next_seq_++;
      }
      run_sequence(sequences_[s]);
    }
  }

  bool stopped() const { return cancel_ && cancel_->cancelled(); }

  void run_sequence(const Sequence& seq) {
    std::vector<std::pair<std::string, std::string>> prior;  // utterance, raw reply
    std::vector<nl::PriorTurn> prior_nl;
    for (std::size_t idx : seq.jobs) {
      const auto& job = plan_[idx];
      const auto& turn = cases_.at(job.conversation_id)->turns[job.turn_index - 1];
      if (!filled_[idx]) {
        if (stopped()) {
          CellResult c;
          c.job = job;
          c.job.status = JobStatus::cancelled;
          finish(idx, std::move(c), "cancelled");
          continue;
        }
        CellResult c = run_job(job, turn, prior, prior_nl);
        std::string type = c.job.status == JobStatus::done ? "cell" : "failure";
        finish(idx, std::move(c), type);
      }
      const auto& done = results_[idx];
      std::string raw = done.response ? done.response->raw_output : "";
      prior.emplace_back(turn.utterance, raw);
      prior_nl.push_back({turn.utterance, done.response ? done.response->nl_text : ""});
    }
  }

  CellResult run_job(const EvalJob& job, const ConversationTurn& turn,
                     const std::vector<std::pair<std::string, std::string>>& prior,
                     const std::vector<nl::PriorTurn>& prior_nl) {
    CellResult c;
    c.job = job;
    const TestCase& tc = *cases_.at(job.conversation_id);
    const Datasource* ds = resolve_datasource(in_.datasources, tc.datasource_ref);
    try {
      if (!ds) throw std::runtime_error("no datasource matches \"" + tc.datasource_ref + "\"");
      llm::PromptBindings b{nl::datasource_summary(*ds), turn.utterance, llm::output_schema().dump(2), prior};
      llm::GenerationRequest req;
      req.messages.push_back({"user", llm::render_prompt(in_.config.system_prompts.at(job.prompt_index - 1), b)});
      req.decoding.temperature = llm::kCandidateTemperature;
      req.replicate = job.run_index;
      req.cache_salt = job.key();
      c.response = gw_.generate(job.model, req);
    } catch (const std::exception& e) {
      c.job.status = JobStatus::failed;
      c.error = e.what();
      return c;
    }
    score(c, *ds, turn, prior_nl);
    c.job.status = JobStatus::done;
    return c;
  }

  void score(CellResult& c, const Datasource& ds, const ConversationTurn& turn,
             const std::vector<nl::PriorTurn>& prior_nl) {
    const auto& resp = *c.response;
    std::vector<std::string> viz_ids, judge_ids, nlg_ids;
    bool grounding = false;
    for (const auto& id : metrics_) {
      if (is_viz_metric(id)) viz_ids.push_back(id);
      else if (is_judge_metric(id)) judge_ids.push_back(id);
      else if (is_nlg_metric(id)) nlg_ids.push_back(id);
      else if (id == metric_id::factual_grounding) grounding = true;
    }
    if (!viz_ids.empty()) {
      c.viz_scores = metrics::score_visualization(turn.expected, resp.viz_spec, ds, viz_ids, in_.config.strict);
      bool any = std::any_of(c.viz_scores.begin(), c.viz_scores.end(), [](const auto& s) { return s.scored(); });
      if (any) c.overall_viz = metrics::overall_viz_score(c.viz_scores);
    }
    std::string reference = turn.expected.empty() ? "" : turn.expected.front().nl_explanation;
    if (grounding) {
      nl::LexicalContradictionChecker checker(&ds);
      std::optional<MetricScore> best;
      for (const auto& e : turn.expected) {
        auto s = nl::score_factual_grounding(e.nl_explanation, resp.nl_text, embedder_, checker);
        if (!best || (s.scored() && (!best->scored() || s.value > best->value))) best = s;
      }
      if (!best) {
        best = MetricScore{};
        best->metric_id = std::string(metric_id::factual_grounding);
        best->status = MetricStatus::unavailable;
        best->explanation = "no expected explanation";
      }
      c.nl_scores.push_back(*best);
    }
    for (const auto& id : judge_ids) c.nl_scores.push_back(judge(id, c, ds, turn, reference, prior_nl));
    if (!nlg_ids.empty()) {
      for (auto& s : nl::score_nlg(reference, resp.nl_text)) {
        if (std::find(nlg_ids.begin(), nlg_ids.end(), s.metric_id) != nlg_ids.end()) c.nlg_scores.push_back(s);
      }
    }
    c.overall_nl = nl::overall_nl_score(c.nl_scores);
  }

  MetricScore judge(const std::string& id, const CellResult& c, const Datasource& ds, const ConversationTurn& turn,
                    const std::string& reference, const std::vector<nl::PriorTurn>& prior_nl) {
    MetricScore s;
    s.metric_id = id;
    s.status = MetricStatus::unavailable;
    auto rubric = in_.rubrics.find(id);
    if (rubric == in_.rubrics.end()) {
      s.explanation = "no rubric loaded for " + id;
      return s;
    }
    nl::JudgeContext ctx{nl::datasource_summary(ds), prior_nl, turn.utterance, reference, c.response->nl_text,
                         c.job.turn_index};
    if (rubric->second.multi_turn_only && ctx.turn_index < 2) {
      return nl::judge_metric_score(rubric->second, ctx, {}, 0);
    }
    if (!in_.config.judge_model) {
      s.explanation = "no judge model configured";
      return s;
    }
    const ModelRef judge_model = *in_.config.judge_model;
    int replicate = c.job.run_index;
    std::string salt = c.job.key() + "|" + id;
    nl::JudgeFn fn = [&](const std::string& prompt) { return gw_.judge(judge_model, prompt, replicate, salt); };
    try {
      return nl::judge_metric_score(rubric->second, ctx, fn, fnv1a(c.job.key() + "|" + id));
    } catch (const std::exception& e) {
      s.explanation = std::string("judge failed: ") + e.what();
      return s;
    }
  }

  void emit(const std::string& type, std::size_t idx) {
    Event e;
    e.type = type;
    e.cell = results_[idx];
    e.total = static_cast<int>(plan_.size());
    e.completed = ++completed_;
    if (sink_) sink_(e);
  }

  void finish(std::size_t idx, CellResult c, const std::string& type) {
    std::lock_guard lock(mu_);
    results_[idx] = std::move(c);
    filled_[idx] = 1;
    if (checkpoint_.is_open() && results_[idx].job.status == JobStatus::done) {
      checkpoint_ << cell_result_to_json(results_[idx]).dump() << '\n';
      checkpoint_.flush();
    }
    emit(type, idx);
  }

  const EvalInputs& in_;
  llm::Gateway& gw_;
  const RunOptions& opt_;
  const EventSink& sink_;
  const CancelToken* cancel_;
  nl::LexicalEmbedder embedder_;

  std::vector<EvalJob> plan_;
  std::vector<std::string> metrics_;
  std::map<std::string, const TestCase*> cases_;
  std::vector<CellResult> results_;
  std::vector<char> filled_;  // not vector<bool>: workers touch neighbouring slots
  std::vector<Sequence> sequences_;
  std::size_t next_seq_ = 0;
  int completed_ = 0;
  std::mutex mu_;
  std::ofstream checkpoint_;
};

}  // namespace

Results run_experiment(const EvalInputs& inputs, llm::Gateway& gateway, const RunOptions& options,
                       const EventSink& sink, const CancelToken* cancel) {
  return Runner(inputs, gateway, options, sink, cancel).run();
}

}  // namespace cvabench::eval
