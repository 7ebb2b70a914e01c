#include "cvabench/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "cvabench/llm_gateway.hpp"
#include "cvabench/mock_model.hpp"
#include "cvabench/nl_metrics.hpp"
#include "cvabench/server.hpp"
#include "cvabench/stats.hpp"
#include "cvabench/text.hpp"

namespace cvabench::cli {

namespace fs = std::filesystem;

eval::CancelToken& interrupt_token() {
  static eval::CancelToken token;
  return token;
}

Workspace load_workspace(const std::string& suite_path, const std::vector<std::string>& datasource_paths) {
  Workspace ws;
  std::vector<Violation> errors;
  for (const auto& p : datasource_paths) {
    try {
      ws.datasources.push_back(load_datasource(p));
    } catch (const ValidationError& e) {
      errors.insert(errors.end(), e.violations().begin(), e.violations().end());
    }
  }
  if (!errors.empty()) throw ValidationError(errors);
  if (!suite_path.empty()) ws.suite = load_test_suite(suite_path, ws.datasources, &ws.warnings);
  return ws;
}

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  auto measure = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  };
  measure(header);
  for (const auto& r : rows) measure(r);
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& r) {
    std::string s;
    for (std::size_t i = 0; i < width.size(); ++i) {
      std::string cell = i < r.size() ? r[i] : "";
      s += cell;
      if (i + 1 < width.size()) s += std::string(width[i] - cell.size() + 2, ' ');
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    os << s << '\n';
  };
  line(header);
  std::vector<std::string> rule;
  for (auto w : width) rule.push_back(std::string(w, '-'));
  line(rule);
  for (const auto& r : rows) line(r);
  return os.str();
}

namespace {

std::string num(const std::optional<double>& v, int precision = 1) {
  if (!v) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << *v;
  return os.str();
}

void print_violations(const std::vector<Violation>& v, std::ostream& os) {
  for (const auto& x : v) os << x.to_string() << '\n';
}

std::vector<std::string> split_list(const std::vector<std::string>& values) {
  std::vector<std::string> out;
  for (const auto& v : values) {
    for (const auto& part : text::split(v, ',')) {
      auto t = text::trim(part);
      if (!t.empty()) out.push_back(t);
    }
  }
  return out;
}

ModelRef resolve_model(const llm::Registry& reg, const std::string& ref) {
  auto m = model_ref_from_json(json(ref));
  if (m.provider_id.empty()) {
    std::vector<const llm::RegistryModel*> hits;
    for (const auto& r : reg.models) {
      if (r.ref.model_id == m.model_id) hits.push_back(&r);
    }
    if (hits.size() == 1) return hits.front()->ref;
    throw ValidationError({{Severity::error, "", "models", "resolve",
                            hits.empty() ? "unknown model \"" + ref + "\"; use provider/model"
                                         : "model \"" + ref + "\" is ambiguous; use provider/model"}});
  }
  if (!reg.provider(m.provider_id)) {
    throw ValidationError({{Severity::error, "", "models", "resolve", "unknown provider in \"" + ref + "\""}});
  }
  if (!reg.find(m.provider_id, m.model_id)) {
    throw ValidationError({{Severity::error, "", "models", "resolve", "model \"" + ref + "\" is not in the registry"}});
  }
  return reg.complete_ref(m);
}

std::vector<double> parse_scale(const std::string& s) {
  std::vector<double> out;
  if (s.empty()) return out;
  auto dash = s.find('-');
  if (dash != std::string::npos && s.find(',') == std::string::npos) {
    int lo = std::stoi(s.substr(0, dash)), hi = std::stoi(s.substr(dash + 1));
    for (int i = lo; i <= hi; ++i) out.push_back(i);
    return out;
  }
  for (const auto& p : text::split(s, ',')) out.push_back(std::stod(text::trim(p)));
  return out;
}

// --- validate -------------------------------------------------------------

struct ValidateArgs {
  std::string suite;
  std::vector<std::string> datasources;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out, std::ostream& err) {
  try {
    auto ws = load_workspace(a.suite, a.datasources);
    print_violations(ws.warnings, err);
    std::size_t turns = 0;
    for (const auto& tc : ws.suite) turns += tc.turns.size();
    out << "OK: " << ws.suite.size() << " conversations, " << turns << " turns";
    if (!ws.warnings.empty()) out << " (" << ws.warnings.size() << " warnings)";
    out << '\n';
    return kExitOk;
  } catch (const ValidationError& e) {
    print_violations(e.violations(), err);
    return kExitValidation;
  }
}

// --- run ------------------------------------------------------------------

struct RunArgs {
  std::string suite;
  std::vector<std::string> datasources;
  std::vector<std::string> models;
  std::vector<std::string> prompts;
  std::vector<std::string> metrics;
  int runs = 3;
  std::string judge = "auto";
  std::string select;
  std::string out = "results.json";
  std::string csv;
  std::string replay;
  std::string replay_mode;
  std::string registry;
  std::string rubrics;
  std::string checkpoint;
  std::string experiment_id;
  int workers = 4;
  bool strict = false;
  bool mock = false;
  std::string mock_script;
  bool quiet = false;
};

fs::path data_default(const std::string& rel) {
  if (const char* d = std::getenv("CVABENCH_DATA")) return fs::path(d) / rel;
  return fs::path("data") / rel;
}

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  eval::EvalInputs in;
  llm::Registry reg;
  std::unique_ptr<llm::Gateway> gateway;
  try {
    auto ws = load_workspace(a.suite, a.datasources);
    print_violations(ws.warnings, err);
    in.suite = ws.suite;
    in.datasources = ws.datasources;
    reg = llm::load_registry(a.registry.empty() ? data_default("registry.json") : fs::path(a.registry));
    in.rubrics = nl::load_rubrics(a.rubrics.empty() ? data_default("rubrics") : fs::path(a.rubrics));

    json cfg;
    json models = json::array();
    for (const auto& m : split_list(a.models)) models.push_back(model_ref_to_json(resolve_model(reg, m)));
    cfg["models"] = models;
    json prompts = json::array();
    for (const auto& p : split_list(a.prompts)) {
      try {
        prompts.push_back(read_file(p));
      } catch (const std::exception& e) {
        throw ValidationError({{Severity::error, p, "prompts", "read", e.what()}});
      }
    }
    cfg["systemPrompts"] = prompts;
    cfg["metrics"] = split_list(a.metrics);
    cfg["runs"] = a.runs;
    cfg["testCaseSelection"] = a.select;
    cfg["strict"] = a.strict;
    in.config = experiment_config_from_json(cfg);
    if (a.judge == "auto") {
      auto rec = llm::recommend_judge(in.config.models, reg);
      in.config.judge_model = rec.model;
      if (rec.model) {
        err << "judge: " << rec.model->key() << " (recommended)";
        if (rec.self_preference_warning) err << " - shares a family with a candidate, expect self-preference";
        err << '\n';
      }
    } else if (a.judge != "none" && !a.judge.empty()) {
      in.config.judge_model = resolve_model(reg, a.judge);
    }
    eval::plan_experiment(in.config, in.suite);

    llm::GatewayOptions opt;
    opt.replay_dir = a.replay;
    if (!a.replay_mode.empty()) {
      auto m = llm::parse_replay_mode(a.replay_mode);
      if (!m) throw ValidationError({{Severity::error, "", "replay-mode", "enum", "use off, replay, record or auto"}});
      opt.mode = *m;
    } else {
      opt.mode = a.replay.empty() ? llm::ReplayMode::off : llm::ReplayMode::replay;
    }
    std::shared_ptr<llm::Transport> transport;
    if (a.mock) {
      llm::MockModel mock;
      mock.add_suite(in.suite);
      if (!a.mock_script.empty()) mock.add_script(load_document(a.mock_script));
      transport = std::make_shared<llm::MockTransport>(std::move(mock));
    }
    gateway = std::make_unique<llm::Gateway>(reg, opt, transport);
    if (!a.mock && opt.mode != llm::ReplayMode::replay) {
      for (const auto& m : in.config.models) gateway->check_ready(m);
      if (in.config.judge_model) gateway->check_ready(*in.config.judge_model);
    }
  } catch (const ValidationError& e) {
    print_violations(e.violations(), err);
    return kExitValidation;
  } catch (const llm::ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  int failures = 0;
  eval::EventSink sink = [&](const eval::Event& e) {
    if (e.type == "failure") ++failures;
    if (a.quiet || !e.cell || e.type == "cancelled") return;
    const auto& j = e.cell->job;
    out << '[' << std::setw(4) << e.completed << '/' << e.total << "] " << j.model.key() << " prompt "
        << j.prompt_index << " conv " << j.conversation_id << " turn " << j.turn_index << " run " << j.run_index;
    if (e.type == "failure") out << "  FAILED: " << e.cell->error << '\n';
    else out << "  viz " << num(e.cell->overall_viz) << "  nl " << num(e.cell->overall_nl) << '\n';
    out.flush();
  };

  eval::RunOptions ro;
  ro.experiment_id = a.experiment_id;
  ro.workers = a.workers;
  ro.checkpoint_dir = a.checkpoint;
  eval::Results res;
  try {
    res = eval::run_experiment(in, *gateway, ro, sink, &interrupt_token());
    eval::export_results(res, eval::ExportFormat::json, a.out);
    if (!a.csv.empty()) eval::export_results(res, eval::ExportFormat::csv, a.csv);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  out << "results: " << a.out << '\n';
  if (res.aggregate) {
    out << res.aggregate->coverage_note << '\n';
    if (res.aggregate->recommendation) {
      const auto& r = *res.aggregate->recommendation;
      out << "recommended: " << r.model.key() << " with prompt " << r.prompt_index << " (combined " << num(r.combined)
          << ")\n  " << r.rationale << '\n';
    }
  }
  if (res.partial) {
    err << "run stopped early; partial results written to " << a.out << '\n';
    return kExitCancelled;
  }
  if (!res.aggregate) {
    err << "error: no cell completed\n";
    return kExitRuntime;
  }
  return failures ? kExitRuntime : kExitOk;
}

// --- report ---------------------------------------------------------------

struct ReportArgs {
  std::string results;
  std::string by = "config";
  std::string format = "table";
};

struct ReportRow {
  std::string section, label;
  eval::GroupStats stats;
};

std::vector<ReportRow> report_rows(const eval::Results& r, const std::string& by) {
  std::vector<ReportRow> rows;
  auto group = [&](auto key_of, const std::string& section) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<eval::CellResult>> groups;
    for (const auto& c : r.cells) {
      auto k = key_of(c);
      if (!groups.count(k)) order.push_back(k);
      groups[k].push_back(c);
    }
    for (const auto& k : order) rows.push_back({section, k, eval::summarize(groups[k])});
  };
  if (by == "model") {
    group([](const eval::CellResult& c) { return c.job.model.key(); }, "model");
  } else if (by == "prompt") {
    group([](const eval::CellResult& c) { return "prompt " + std::to_string(c.job.prompt_index); }, "prompt");
  } else if (by == "label") {
    if (!r.aggregate) return rows;
    for (const auto& b : r.aggregate->breakdowns) {
      rows.push_back({b.dimension, b.label + " | " + b.model.key() + " p" + std::to_string(b.prompt_index), b.stats});
    }
  } else {
    if (!r.aggregate) return rows;
    for (const auto& c : r.aggregate->configs) {
      rows.push_back({"config", c.model.key() + " p" + std::to_string(c.prompt_index), c.stats});
    }
  }
  return rows;
}

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  eval::Results r;
  try {
    r = eval::load_results(a.results);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  if (a.format == "csv") {
    out << eval::results_csv(r);
    return kExitOk;
  }
  auto rows = report_rows(r, a.by);
  std::set<std::string> metric_set;
  for (const auto& row : rows) {
    for (const auto& [id, _] : row.stats.metric_means) metric_set.insert(id);
  }
  std::vector<std::string> metric_ids;
  for (const auto& id : all_metric_ids()) {
    if (metric_set.count(id)) metric_ids.push_back(id);
  }
  if (a.format == "json") {
    json j = json::array();
    for (const auto& row : rows) {
      j.push_back({{"section", row.section},
                   {"label", row.label},
                   {"cells", row.stats.cells},
                   {"overallViz", row.stats.overall_viz ? json(*row.stats.overall_viz) : json(nullptr)},
                   {"overallNl", row.stats.overall_nl ? json(*row.stats.overall_nl) : json(nullptr)},
                   {"combined", row.stats.combined ? json(*row.stats.combined) : json(nullptr)},
                   {"metrics", row.stats.metric_means}});
    }
    json doc = {{"experimentId", r.experiment_id}, {"partial", r.partial}, {"by", a.by}, {"rows", j}};
    if (r.aggregate && r.aggregate->recommendation) {
      doc["recommendation"] = eval::aggregate_to_json(*r.aggregate)["recommendation"];
    }
    out << doc.dump(2) << '\n';
    return kExitOk;
  }

  if (r.partial) out << "PARTIAL RUN\n";
  out << "experiment " << r.experiment_id << '\n';
  if (r.aggregate) out << r.aggregate->coverage_note << '\n';
  std::vector<std::string> header = {a.by == "label" ? "label | config" : a.by, "cells", "viz", "nl", "combined"};
  for (const auto& id : metric_ids) header.push_back(id);
  std::string section;
  std::vector<std::vector<std::string>> body;
  auto flush = [&] {
    if (body.empty()) return;
    out << '\n' << "[" << section << "]\n" << render_table(header, body);
    body.clear();
  };
  for (const auto& row : rows) {
    if (row.section != section) {
      flush();
      section = row.section;
    }
    std::vector<std::string> cells = {row.label, std::to_string(row.stats.cells), num(row.stats.overall_viz),
                                      num(row.stats.overall_nl), num(row.stats.combined)};
    for (const auto& id : metric_ids) {
      auto it = row.stats.metric_means.find(id);
      cells.push_back(it == row.stats.metric_means.end() ? "-" : num(it->second));
    }
    body.push_back(cells);
  }
  flush();
  if (r.aggregate && r.aggregate->recommendation) {
    const auto& rec = *r.aggregate->recommendation;
    out << "\nrecommended: " << rec.model.key() << " with prompt " << rec.prompt_index << '\n'
        << "  " << rec.rationale << '\n';
  }
  return kExitOk;
}

// --- stats ----------------------------------------------------------------

struct StatsArgs {
  std::string csv;
  bool kappa = false, spearman = false, preferences = false;
  std::string scale;
  std::vector<std::string> raters;
  std::string reference;
};

int cmd_stats(const StatsArgs& a, std::ostream& out, std::ostream& err) {
  int chosen = a.kappa + a.spearman + a.preferences;
  if (chosen != 1) {
    err << "error: choose exactly one of --kappa, --spearman, --preferences\n";
    return kExitValidation;
  }
  try {
    if (a.preferences) {
      auto rows = stats::load_preferences(a.csv);
      auto res = stats::preference_scores(stats::rankings_from_rows(rows), {});
      std::vector<std::vector<std::string>> body;
      for (const auto& [m, s] : res.scores) {
        body.push_back({m, std::to_string(res.participants.at(m)), num(s, 4)});
      }
      out << render_table({"model", "participants", "preference"}, body);
      for (const auto& n : res.notes) out << "note: " << n << '\n';
      return kExitOk;
    }
    auto ratings = stats::load_ratings(a.csv);
    auto raters = split_list(a.raters);
    auto rows = a.kappa ? stats::kappa_by_metric(ratings, parse_scale(a.scale), raters.size() > 0 ? raters[0] : "",
                                                 raters.size() > 1 ? raters[1] : "")
                        : stats::spearman_by_metric(ratings, a.reference);
    std::vector<std::vector<std::string>> body;
    for (const auto& r : rows) body.push_back({r.metric_id, std::to_string(r.items), r.result.to_string()});
    out << render_table({"metric", "items", a.kappa ? "kappa" : "rho"}, body);
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

// --- models ---------------------------------------------------------------

int cmd_models(const std::string& registry, const std::vector<std::string>& candidates, std::ostream& out,
               std::ostream& err) {
  try {
    auto reg = llm::load_registry(registry.empty() ? data_default("registry.json") : fs::path(registry));
    std::vector<ModelRef> cands;
    for (const auto& c : split_list(candidates)) cands.push_back(resolve_model(reg, c));
    auto rec = llm::recommend_judge(cands, reg);
    std::vector<std::vector<std::string>> body;
    for (const auto& m : reg.models) {
      std::string name = m.ref.display_name;
      if (rec.model && rec.model->key() == m.ref.key()) name += " (recommended)";
      body.push_back({m.ref.key(), name, m.ref.family, num(m.strength, 2)});
    }
    out << render_table({"model", "name", "family", "strength"}, body);
    if (rec.self_preference_warning) out << "note: every family is among the candidates; the judge may favor its own family\n";
    return kExitOk;
  } catch (const ValidationError& e) {
    print_violations(e.violations(), err);
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evaluate LLMs for conversational visual analytics"};
  app.require_subcommand(1);

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Check a test suite against its datasources");
  validate->add_option("--testcases", va.suite, "Test suite file (JSON or YAML)")->required();
  validate->add_option("--datasource", va.datasources, "Datasource file; repeat or comma-separate")
      ->required()
      ->delimiter(',');

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run an evaluation experiment");
  run->add_option("--testcases", ra.suite, "Test suite file")->required();
  run->add_option("--datasource", ra.datasources, "Datasource file(s)")->required()->delimiter(',');
  run->add_option("--models", ra.models, "provider/model references")->required()->delimiter(',');
  run->add_option("--prompts", ra.prompts, "System prompt template files")->required()->delimiter(',');
  run->add_option("--metrics", ra.metrics, "Metric ids (default: all)")->delimiter(',');
  run->add_option("--runs", ra.runs, "Replications per cell (1-5)");
  run->add_option("--judge", ra.judge, "Judge model, 'auto' for the recommendation or 'none'");
  run->add_option("--select", ra.select, "Test case ids and ranges, e.g. 1-3,7");
  run->add_option("--out", ra.out, "Results JSON path");
  run->add_option("--csv", ra.csv, "Also write the flattened CSV here");
  run->add_option("--replay", ra.replay, "Replay store directory (replay mode unless --replay-mode is given)");
  run->add_option("--replay-mode", ra.replay_mode, "off | replay | record | auto");
  run->add_option("--registry", ra.registry, "Model registry file");
  run->add_option("--rubrics", ra.rubrics, "Judge rubric directory");
  run->add_option("--checkpoint", ra.checkpoint, "Directory for resumable per-cell checkpoints");
  run->add_option("--experiment-id", ra.experiment_id, "Experiment id (generated when omitted)");
  run->add_option("--workers", ra.workers, "Parallel conversation workers");
  run->add_flag("--strict", ra.strict, "Score viz metrics 0 when no spec could be parsed");
  run->add_flag("--mock", ra.mock, "Answer with the built-in deterministic mock models");
  run->add_option("--mock-script", ra.mock_script, "utterance -> reply JSON for mock-scripted");
  run->add_flag("--quiet", ra.quiet, "No per-cell progress lines");

  ReportArgs rp;
  auto* report = app.add_subcommand("report", "Summarize a results file");
  report->add_option("results", rp.results, "Results JSON")->required();
  report->add_option("--by", rp.by, "config | model | prompt | label")
      ->check(CLI::IsMember({"config", "model", "prompt", "label"}));
  report->add_option("--format", rp.format, "table | json | csv")->check(CLI::IsMember({"table", "json", "csv"}));

  StatsArgs sa;
  auto* st = app.add_subcommand("stats", "Agreement and preference statistics from CSV");
  st->add_option("csv", sa.csv, "Ratings CSV (itemId,raterId,metricId,value) or preferences CSV")->required();
  st->add_flag("--kappa", sa.kappa, "Linear-weighted Cohen's kappa between two raters");
  st->add_flag("--spearman", sa.spearman, "Spearman's rho");
  st->add_flag("--preferences", sa.preferences, "Rank-normalized preference scores (participantId,model,rank)");
  st->add_option("--scale", sa.scale, "Ordinal scale for kappa, e.g. 1-5");
  st->add_option("--raters", sa.raters, "Two rater ids for kappa")->delimiter(',');
  st->add_option("--reference", sa.reference, "Rater compared against the mean of the others for rho");

  std::string models_registry;
  std::vector<std::string> candidates;
  auto* models = app.add_subcommand("models", "List registry models and the recommended judge");
  models->add_option("--registry", models_registry, "Model registry file");
  models->add_option("--candidates", candidates, "Candidate models for the judge recommendation")->delimiter(',');

  server::ServerOptions so;
  std::string serve_registry, serve_mode;
  auto* serve = app.add_subcommand("serve", "Start the HTTP API");
  serve->add_option("--host", so.host, "Bind address");
  serve->add_option("--port", so.port, "Port");
  serve->add_option("--data-dir", so.data_dir, "Directory for uploads and experiment logs");
  serve->add_option("--registry", serve_registry, "Model registry file");
  serve->add_option("--rubrics", so.rubrics_dir, "Judge rubric directory");
  serve->add_option("--replay", so.replay_dir, "Replay store directory");
  serve->add_option("--replay-mode", serve_mode, "off | replay | record | auto");
  serve->add_option("--token", so.token, "Require this value in the X-Api-Token header");
  serve->add_flag("--mock", so.mock, "Answer with the built-in mock models");

  std::vector<const char*> cargv;
  for (const auto& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (*validate) return cmd_validate(va, out, err);
  if (*run) return cmd_run(ra, out, err);
  if (*report) return cmd_report(rp, out, err);
  if (*st) return cmd_stats(sa, out, err);
  if (*models) return cmd_models(models_registry, candidates, out, err);
  if (*serve) {
    try {
      so.registry_path = serve_registry.empty() ? data_default("registry.json") : fs::path(serve_registry);
      if (so.rubrics_dir.empty()) so.rubrics_dir = data_default("rubrics");
      if (!serve_mode.empty()) {
        auto m = llm::parse_replay_mode(serve_mode);
        if (!m) {
          err << "error: --replay-mode must be off, replay, record or auto\n";
          return kExitValidation;
        }
        so.mode = *m;
      } else {
        so.mode = so.replay_dir.empty() ? llm::ReplayMode::off : llm::ReplayMode::auto_;
      }
      so.shutdown = &interrupt_token();
      server::ApiServer api(so);
      err << "listening on http://" << so.host << ':' << so.port << '\n';
      if (!api.listen()) {
        err << "error: cannot bind " << so.host << ':' << so.port << '\n';
        return kExitRuntime;
      }
      return interrupt_token().cancelled() ? kExitCancelled : kExitOk;
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kExitValidation;
    }
  }
  return kExitValidation;
}

}  // namespace cvabench::cli
