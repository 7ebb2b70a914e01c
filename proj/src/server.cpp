#include "cvabench/server.hpp"

#include <httplib.h>

#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "cvabench/mock_model.hpp"
#include "cvabench/nl_metrics.hpp"
#include "cvabench/text.hpp"

namespace cvabench::server {

namespace fs = std::filesystem;

std::string_view to_string(ExperimentState s) {
  switch (s) {
    case ExperimentState::created: return "created";
    case ExperimentState::running: return "running";
    case ExperimentState::stopped: return "stopped";
    case ExperimentState::complete: return "complete";
    case ExperimentState::failed: return "failed";
  }
  return "failed";
}

namespace {

std::optional<ExperimentState> parse_state(std::string_view s) {
  for (auto st : {ExperimentState::created, ExperimentState::running, ExperimentState::stopped,
                  ExperimentState::complete, ExperimentState::failed}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

json violation_json(const Violation& v) {
  return {{"severity", v.severity == Severity::error ? "error" : "warning"},
          {"file", v.file},
          {"path", v.path},
          {"field", v.path},
          {"rule", v.rule},
          {"message", v.message},
          {"text", v.to_string()}};
}

json violations_json(const std::vector<Violation>& vs) {
  json a = json::array();
  for (const auto& v : vs) a.push_back(violation_json(v));
  return a;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, json errors = nullptr) {
  json body = {{"error", message}};
  if (!errors.is_null()) body["errors"] = std::move(errors);
  send_json(res, status, body);
}

void append_line(const fs::path& path, const std::string& line) {
  std::ofstream os(path, std::ios::app | std::ios::binary);
  os << line << '\n';
  os.flush();
}

struct Experiment {
  std::string id;
  json config_json;
  std::string suite_id;
  int planned = 0;

  std::mutex mu;
  std::condition_variable cv;
  ExperimentState state = ExperimentState::created;
  std::vector<json> events;  // {id, type, data}
  int completed = 0;
  int failed = 0;
  std::optional<eval::AggregateReport> aggregate;
  std::optional<eval::Results> results;
  std::string error;
  eval::CancelToken cancel;
  std::thread worker;
  fs::path dir;

  bool finished() const {
    return state == ExperimentState::stopped || state == ExperimentState::complete || state == ExperimentState::failed;
  }

  void append(const std::string& type, json data) {
    std::lock_guard lock(mu);
    json e = {{"id", static_cast<int>(events.size()) + 1}, {"type", type}, {"data", std::move(data)}};
    if (!dir.empty()) append_line(dir / "events.jsonl", e.dump());
    events.push_back(std::move(e));
    cv.notify_all();
  }
};

struct SuiteRecord {
  std::string id;
  std::vector<std::string> datasource_ids;
  std::vector<TestCase> cases;
};

std::string content_id(const std::string& prefix, const json& j) {
  return prefix + "-" + llm::sha256_hex(j.dump()).substr(0, 12);
}

}  // namespace

struct ApiServer::Impl {
  ServerOptions opt;
  llm::Registry registry;
  std::map<std::string, nl::JudgeRubric> rubrics;
  httplib::Server http;

  std::mutex mu;
  std::map<std::string, Datasource> datasources;
  std::vector<std::string> datasource_order;
  std::map<std::string, SuiteRecord> suites;
  std::map<std::string, std::shared_ptr<Experiment>> experiments;
  std::vector<std::string> experiment_order;
  std::atomic<bool> stopping{false};
  std::thread watcher;

  explicit Impl(ServerOptions o) : opt(std::move(o)) {
    registry = llm::load_registry(opt.registry_path);
    rubrics = nl::load_rubrics(opt.rubrics_dir);
    fs::create_directories(opt.data_dir / "datasources");
    fs::create_directories(opt.data_dir / "testcases");
    fs::create_directories(opt.data_dir / "experiments");
    restore();
    routes();
  }

  ~Impl() {
    stopping = true;
    http.stop();
    std::vector<std::shared_ptr<Experiment>> all;
    {
      std::lock_guard lock(mu);
      for (auto& [_, e] : experiments) all.push_back(e);
    }
    for (auto& e : all) {
      e->cancel.cancel();
      e->cv.notify_all();
    }
    for (auto& e : all) {
      if (e->worker.joinable()) e->worker.join();
    }
    if (watcher.joinable()) watcher.join();
  }

  // --- persistence --------------------------------------------------------

  void restore() {
    for (const auto& f : fs::directory_iterator(opt.data_dir / "datasources")) {
      try {
        auto ds = parse_datasource(load_document(f.path()), f.path().string());
        auto id = f.path().stem().string();
        datasources[id] = ds;
        datasource_order.push_back(id);
      } catch (const std::exception&) {
      }
    }
    for (const auto& f : fs::directory_iterator(opt.data_dir / "testcases")) {
      try {
        auto j = load_document(f.path());
        SuiteRecord rec;
        rec.id = f.path().stem().string();
        rec.datasource_ids = j.at("datasourceIds").get<std::vector<std::string>>();
        std::vector<Datasource> sources;
        for (const auto& id : rec.datasource_ids) sources.push_back(datasources.at(id));
        rec.cases = parse_test_suite(j.at("suite"), sources);
        suites[rec.id] = std::move(rec);
      } catch (const std::exception&) {
      }
    }
    std::vector<fs::path> dirs;
    for (const auto& d : fs::directory_iterator(opt.data_dir / "experiments")) {
      if (d.is_directory()) dirs.push_back(d.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      auto e = std::make_shared<Experiment>();
      e->id = d.filename().string();
      e->dir = d;
      try {
        auto meta = load_document(d / "experiment.json");
        e->config_json = meta.value("config", json::object());
        e->suite_id = meta.value("suiteId", "");
        e->planned = meta.value("planned", 0);
      } catch (const std::exception&) {
        continue;
      }
      if (fs::exists(d / "events.jsonl")) {
        std::ifstream is(d / "events.jsonl");
        std::string line;
        while (std::getline(is, line)) {
          auto j = json::parse(line, nullptr, false);
          if (j.is_discarded() || !j.is_object()) continue;
          const auto type = j.value("type", "");
          const auto& data = j["data"];
          if (type == "progress") {
            e->completed = data.value("completed", e->completed);
          } else if (type == "failure") {
            ++e->failed;
          } else if (type == "aggregate" && data.contains("aggregate")) {
            e->aggregate = eval::aggregate_from_json(data["aggregate"]);
          } else if (type == "end") {
            e->state = parse_state(data.value("state", "failed")).value_or(ExperimentState::failed);
            e->error = data.value("error", "");
          }
          e->events.push_back(std::move(j));
        }
      }
      if (fs::exists(d / "results.json")) {
        try {
          e->results = eval::load_results(d / "results.json");
        } catch (const std::exception&) {
        }
      }
      if (!e->finished()) {
        e->state = ExperimentState::failed;
        e->error = "server stopped while the experiment was running";
        json end = {{"id", static_cast<int>(e->events.size()) + 1},
                    {"type", "end"},
                    {"data", {{"state", "failed"}, {"error", e->error}}}};
        append_line(d / "events.jsonl", end.dump());
        e->events.push_back(end);
      }
      experiments[e->id] = e;
      experiment_order.push_back(e->id);
    }
  }

  // --- handlers -----------------------------------------------------------

  std::shared_ptr<Experiment> find_experiment(const std::string& id) {
    std::lock_guard lock(mu);
    auto it = experiments.find(id);
    return it == experiments.end() ? nullptr : it->second;
  }

  void post_datasource(const httplib::Request& req, httplib::Response& res) {
    try {
      auto doc = parse_document(req.body, "datasource.json");
      auto ds = parse_datasource(doc, "datasource");
      auto canonical = datasource_to_json(ds);
      auto id = content_id("ds", canonical);
      {
        std::lock_guard lock(mu);
        if (!datasources.count(id)) datasource_order.push_back(id);
        datasources[id] = ds;
      }
      write_file_atomic(opt.data_dir / "datasources" / (id + ".json"), canonical.dump(2));
      send_json(res, 201, {{"datasourceId", id}, {"title", ds.title}, {"fields", ds.fields.size()}});
    } catch (const ValidationError& e) {
      send_error(res, 400, "invalid datasource", violations_json(e.violations()));
    } catch (const std::exception& e) {
      send_error(res, 400, std::string("invalid datasource: ") + e.what());
    }
  }

  void post_testcases(const httplib::Request& req, httplib::Response& res) {
    try {
      auto doc = parse_document(req.body, "testcases.json");
      json suite_doc = doc;
      std::vector<std::string> ids;
      if (doc.is_object() && doc.contains("suite")) {
        suite_doc = doc["suite"];
        if (auto d = doc.find("datasourceIds"); d != doc.end()) {
          if (!d->is_array()) {
            send_error(res, 400, "invalid test suite",
                       json::array({{{"field", "datasourceIds"}, {"path", "datasourceIds"}, {"rule", "type"},
                                     {"message", "datasourceIds must be a list"}}}));
            return;
          }
          for (const auto& x : *d) ids.push_back(x.is_string() ? x.get<std::string>() : x.dump());
        }
      }
      std::vector<Datasource> sources;
      {
        std::lock_guard lock(mu);
        if (ids.empty()) ids = datasource_order;
        for (const auto& id : ids) {
          auto it = datasources.find(id);
          if (it == datasources.end()) {
            send_error(res, 400, "unknown datasource " + id,
                       json::array({{{"field", "datasourceIds"}, {"path", "datasourceIds"}, {"rule", "exists"},
                                     {"message", "unknown datasource " + id}}}));
            return;
          }
          sources.push_back(it->second);
        }
      }
      if (sources.empty()) {
        send_error(res, 400, "upload a datasource first");
        return;
      }
      std::vector<Violation> warnings;
      auto cases = parse_test_suite(suite_doc, sources, &warnings, "testcases");
      SuiteRecord rec{content_id("tc", json{{"ids", ids}, {"suite", suite_doc}}), ids, cases};
      json stored = {{"datasourceIds", ids}, {"suite", suite_doc}};
      write_file_atomic(opt.data_dir / "testcases" / (rec.id + ".json"), stored.dump(2));
      std::size_t turns = 0;
      json conversations = json::array();
      for (const auto& tc : cases) {
        turns += tc.turns.size();
        conversations.push_back({{"conversationId", tc.conversation_id}, {"turns", tc.turns.size()}});
      }
      json body = {{"testCasesId", rec.id},
                   {"suiteId", rec.id},
                   {"conversations", cases.size()},
                   {"turns", turns},
                   {"items", conversations},
                   {"warnings", violations_json(warnings)}};
      {
        std::lock_guard lock(mu);
        suites[rec.id] = std::move(rec);
      }
      send_json(res, 201, body);
    } catch (const ValidationError& e) {
      send_error(res, 400, "invalid test suite", violations_json(e.violations()));
    } catch (const std::exception& e) {
      send_error(res, 400, std::string("invalid test suite: ") + e.what());
    }
  }

  void get_models(const httplib::Request& req, httplib::Response& res) {
    std::vector<ModelRef> candidates;
    if (req.has_param("candidates")) {
      for (const auto& c : text::split(req.get_param_value("candidates"), ',')) {
        auto ref = model_ref_from_json(json(text::trim(c)));
        if (!ref.model_id.empty()) candidates.push_back(registry.complete_ref(ref));
      }
    }
    auto rec = llm::recommend_judge(candidates, registry);
    json models = json::array();
    for (const auto& m : registry.models) {
      const auto* p = registry.provider(m.ref.provider_id);
      bool has_key = !p || !p->requires_key || std::getenv(credential_env_name(*p).c_str()) != nullptr;
      bool recommended = rec.model && rec.model->key() == m.ref.key();
      auto label = m.ref.display_name.empty() ? m.ref.model_id : m.ref.display_name;
      if (recommended) label += " (recommended)";
      models.push_back({{"id", m.ref.key()},
                        {"providerId", m.ref.provider_id},
                        {"modelId", m.ref.model_id},
                        {"family", m.ref.family},
                        {"displayName", m.ref.display_name},
                        {"label", label},
                        {"strength", m.strength},
                        {"recommendedJudge", recommended},
                        {"available", has_key || opt.mock || opt.mode == llm::ReplayMode::replay}});
    }
    json body = {{"models", models}, {"recommendedJudge", rec.model ? json(rec.model->key()) : json(nullptr)}};
    if (rec.self_preference_warning) {
      body["warning"] = "every model family is among the candidates; the judge may favor its own family";
    }
    send_json(res, 200, body);
  }

  void post_experiment(const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      send_error(res, 400, "body must be a JSON object");
      return;
    }
    json errors = json::array();
    auto field_error = [&](const std::string& field, const std::string& message) {
      errors.push_back({{"field", field}, {"message", message}});
    };
    std::string suite_id = body.value("testCasesId", body.value("suiteId", ""));
    json cfg = body.contains("config") ? body["config"] : body;
    SuiteRecord suite;
    {
      std::lock_guard lock(mu);
      auto it = suites.find(suite_id);
      if (it == suites.end()) {
        field_error("testCasesId", suite_id.empty() ? "upload test cases first and pass testCasesId"
                                                    : "unknown test cases " + suite_id);
      } else {
        suite = it->second;
      }
    }
    std::string judge_choice = "auto";
    if (auto j = cfg.find("judgeModel"); j != cfg.end()) {
      if (j->is_null()) judge_choice = "none";
      else if (j->is_string() && (*j == "auto" || *j == "none")) judge_choice = j->get<std::string>();
      else judge_choice = "";
      if (!judge_choice.empty()) cfg.erase("judgeModel");
    }
    ExperimentConfig config;
    try {
      config = experiment_config_from_json(cfg);
    } catch (const ValidationError& e) {
      for (const auto& v : e.violations()) field_error(v.path, v.message);
    }
    if (errors.empty()) {
      for (std::size_t i = 0; i < config.models.size(); ++i) {
        auto& m = config.models[i];
        if (!registry.find(m.provider_id, m.model_id)) {
          field_error("models[" + std::to_string(i) + "]", "unknown model " + m.key());
        } else {
          m = registry.complete_ref(m);
        }
      }
      if (config.judge_model) {
        if (!registry.find(config.judge_model->provider_id, config.judge_model->model_id)) {
          field_error("judgeModel", "unknown model " + config.judge_model->key());
        } else {
          config.judge_model = registry.complete_ref(*config.judge_model);
        }
      } else if (judge_choice == "auto") {
        config.judge_model = llm::recommend_judge(config.models, registry).model;
      }
    }
    std::unique_ptr<llm::Gateway> gateway;
    if (errors.empty()) {
      gateway = make_gateway(suite.cases);
      if (!opt.mock && !opt.transport && opt.mode != llm::ReplayMode::replay) {
        for (std::size_t i = 0; i < config.models.size(); ++i) {
          try {
            gateway->check_ready(config.models[i]);
          } catch (const std::exception& e) {
            field_error("models[" + std::to_string(i) + "]", e.what());
          }
        }
        if (config.judge_model) {
          try {
            gateway->check_ready(*config.judge_model);
          } catch (const std::exception& e) {
            field_error("judgeModel", e.what());
          }
        }
      }
    }
    int planned = 0;
    if (errors.empty()) {
      try {
        planned = static_cast<int>(eval::plan_experiment(config, suite.cases).size());
      } catch (const ValidationError& e) {
        for (const auto& v : e.violations()) field_error(v.path, v.message);
      }
    }
    if (!errors.empty()) {
      send_error(res, 400, "invalid experiment configuration", errors);
      return;
    }

    auto e = std::make_shared<Experiment>();
    e->id = eval::new_experiment_id();
    e->config_json = experiment_config_to_json(config);
    e->suite_id = suite.id;
    e->planned = planned;
    e->dir = opt.data_dir / "experiments" / e->id;
    fs::create_directories(e->dir);
    write_file_atomic(e->dir / "experiment.json",
                      json{{"experimentId", e->id}, {"suiteId", suite.id}, {"planned", planned}, {"config", e->config_json}}
                          .dump(2));
    {
      std::lock_guard lock(mu);
      experiments[e->id] = e;
      experiment_order.push_back(e->id);
    }

    eval::EvalInputs in;
    in.config = config;
    in.suite = suite.cases;
    {
      std::lock_guard lock(mu);
      for (const auto& id : suite.datasource_ids) in.datasources.push_back(datasources.at(id));
    }
    in.rubrics = rubrics;
    {
      std::lock_guard lock(e->mu);
      e->state = ExperimentState::running;
    }
    e->worker = std::thread([this, e, in = std::move(in), gw = std::move(gateway)]() mutable {
      run(e, in, *gw);
    });
    send_json(res, 201, {{"experimentId", e->id}, {"state", "running"}, {"planned", planned}});
  }

  std::unique_ptr<llm::Gateway> make_gateway(const std::vector<TestCase>& cases) {
    llm::GatewayOptions go;
    go.mode = opt.mode;
    go.replay_dir = opt.replay_dir;
    if (go.replay_dir.empty() && go.mode != llm::ReplayMode::off) go.mode = llm::ReplayMode::off;
    std::shared_ptr<llm::Transport> transport = opt.transport;
    if (!transport && opt.mock) {
      llm::MockModel mock;
      mock.add_suite(cases);
      transport = std::make_shared<llm::MockTransport>(std::move(mock));
    }
    return std::make_unique<llm::Gateway>(registry, go, transport);
  }

  void run(const std::shared_ptr<Experiment>& e, const eval::EvalInputs& in, llm::Gateway& gateway) {
    e->append("progress", {{"completed", 0}, {"total", e->planned}, {"progress", 0.0}});
    eval::RunOptions ro;
    ro.experiment_id = e->id;
    ro.workers = opt.workers;
    ro.checkpoint_dir = e->dir;
    auto sink = [&](const eval::Event& ev) {
      if (ev.type == "cell" || ev.type == "failure") {
        {
          std::lock_guard lock(e->mu);
          e->completed = ev.completed;
          if (ev.type == "failure") ++e->failed;
        }
        e->append(ev.type, ev.to_json());
        e->append("progress", {{"completed", ev.completed}, {"total", ev.total}, {"progress", ev.progress()}});
      } else if (ev.type == "aggregate" && ev.aggregate) {
        {
          std::lock_guard lock(e->mu);
          e->aggregate = ev.aggregate;
        }
        e->append("aggregate", ev.to_json());
      }
    };
    ExperimentState final_state = ExperimentState::complete;
    std::string error;
    try {
      auto results = eval::run_experiment(in, gateway, ro, sink, &e->cancel);
      write_file_atomic(e->dir / "results.json", eval::results_to_json(results).dump());
      if (results.partial) final_state = ExperimentState::stopped;
      else if (!results.aggregate) {
        final_state = ExperimentState::failed;
        error = "no cell completed";
      }
      std::lock_guard lock(e->mu);
      e->results = std::move(results);
    } catch (const std::exception& ex) {
      final_state = ExperimentState::failed;
      error = ex.what();
    }
    {
      std::lock_guard lock(e->mu);
      e->state = final_state;
      e->error = error;
    }
    json end = {{"state", to_string(final_state)}};
    if (!error.empty()) end["error"] = error;
    e->append("end", end);
  }

  json experiment_json(Experiment& e) {
    std::lock_guard lock(e.mu);
    json j = {{"experimentId", e.id},
              {"state", to_string(e.state)},
              {"planned", e.planned},
              {"completed", e.completed},
              {"failed", e.failed},
              {"progress", e.planned ? static_cast<double>(e.completed) / e.planned : 1.0},
              {"testCasesId", e.suite_id},
              {"config", e.config_json}};
    bool show = e.state == ExperimentState::complete || e.state == ExperimentState::stopped;
    j["aggregate"] = show && e.aggregate ? eval::aggregate_to_json(*e.aggregate) : json(nullptr);
    j["partial"] = e.state == ExperimentState::stopped;
    if (!e.error.empty()) j["error"] = e.error;
    return j;
  }

  void stream_events(const std::shared_ptr<Experiment>& e, const httplib::Request& req, httplib::Response& res) {
    std::size_t start = 0;
    auto from = req.get_header_value("Last-Event-ID");
    if (from.empty() && req.has_param("after")) from = req.get_param_value("after");
    if (!from.empty()) {
      try {
        start = static_cast<std::size_t>(std::max(0L, std::stol(from)));
      } catch (const std::exception&) {
      }
    }
    auto next = std::make_shared<std::size_t>(start);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [this, e, next](std::size_t, httplib::DataSink& sink) {
      std::vector<json> batch;
      bool done = false;
      {
        std::unique_lock lock(e->mu);
        e->cv.wait_for(lock, std::chrono::seconds(15),
                       [&] { return e->events.size() > *next || stopping.load(); });
        for (; *next < e->events.size(); ++*next) batch.push_back(e->events[*next]);
        done = (!batch.empty() && batch.back()["type"] == "end") ||
               (e->finished() && *next >= e->events.size()) || stopping.load();
      }
      if (batch.empty() && !done) {
        static const std::string ping = ": keepalive\n\n";
        return sink.write(ping.data(), ping.size());
      }
      for (const auto& ev : batch) {
        std::string chunk = "id: " + std::to_string(ev["id"].get<int>()) + "\nevent: " +
                            ev["type"].get<std::string>() + "\ndata: " + ev["data"].dump() + "\n\n";
        if (!sink.write(chunk.data(), chunk.size())) return false;
      }
      if (done) sink.done();
      return true;
    });
  }

  void routes() {
    if (!opt.token.empty()) {
      http.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
        if (req.method == "OPTIONS") return httplib::Server::HandlerResponse::Unhandled;
        auto bearer = req.get_header_value("Authorization");
        if (req.get_header_value("X-Api-Token") == opt.token || bearer == "Bearer " + opt.token) {
          return httplib::Server::HandlerResponse::Unhandled;
        }
        send_error(res, 401, "missing or wrong X-Api-Token header");
        return httplib::Server::HandlerResponse::Handled;
      });
    }
    http.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type, X-Api-Token, Last-Event-ID"}});
    http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    http.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, {{"status", "ok"}});
    });
    http.Post("/api/datasources",
              [this](const httplib::Request& req, httplib::Response& res) { post_datasource(req, res); });
    http.Get("/api/datasources", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mu);
      json list = json::array();
      for (const auto& id : datasource_order) {
        const auto& ds = datasources.at(id);
        list.push_back({{"datasourceId", id}, {"title", ds.title}, {"fields", ds.fields.size()}});
      }
      send_json(res, 200, list);
    });
    http.Post("/api/testcases",
              [this](const httplib::Request& req, httplib::Response& res) { post_testcases(req, res); });
    http.Get("/api/models", [this](const httplib::Request& req, httplib::Response& res) { get_models(req, res); });
    http.Post("/api/experiments",
              [this](const httplib::Request& req, httplib::Response& res) { post_experiment(req, res); });
    http.Get("/api/experiments", [this](const httplib::Request&, httplib::Response& res) {
      std::vector<std::shared_ptr<Experiment>> list;
      {
        std::lock_guard lock(mu);
        for (const auto& id : experiment_order) list.push_back(experiments.at(id));
      }
      json out = json::array();
      for (const auto& e : list) {
        auto j = experiment_json(*e);
        j.erase("config");
        j.erase("aggregate");
        out.push_back(j);
      }
      send_json(res, 200, out);
    });
    http.Get(R"(/api/experiments/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto e = find_experiment(req.matches[1]);
      if (!e) return send_error(res, 404, "unknown experiment " + req.matches[1].str());
      send_json(res, 200, experiment_json(*e));
    });
    http.Get(R"(/api/experiments/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      auto e = find_experiment(req.matches[1]);
      if (!e) return send_error(res, 404, "unknown experiment " + req.matches[1].str());
      stream_events(e, req, res);
    });
    http.Post(R"(/api/experiments/([^/]+)/stop)", [this](const httplib::Request& req, httplib::Response& res) {
      auto e = find_experiment(req.matches[1]);
      if (!e) return send_error(res, 404, "unknown experiment " + req.matches[1].str());
      std::lock_guard lock(e->mu);
      if (e->state != ExperimentState::running && e->state != ExperimentState::created) {
        return send_error(res, 409, "experiment is " + std::string(to_string(e->state)) + ", not running");
      }
      e->cancel.cancel();
      send_json(res, 202, {{"experimentId", e->id}, {"state", "stopping"}});
    });
    http.Get(R"(/api/experiments/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
      auto e = find_experiment(req.matches[1]);
      if (!e) return send_error(res, 404, "unknown experiment " + req.matches[1].str());
      auto format = req.has_param("format") ? req.get_param_value("format") : "json";
      if (format != "json" && format != "csv") return send_error(res, 400, "format must be json or csv");
      std::lock_guard lock(e->mu);
      if (!e->finished()) return send_error(res, 409, "experiment is still running");
      if (!e->results) return send_error(res, 409, "experiment produced no results");
      res.set_header("Content-Disposition", "attachment; filename=\"" + e->id + "." + format + "\"");
      if (format == "csv") {
        res.set_content(eval::results_csv(*e->results), "text/csv");
      } else {
        res.set_content(eval::results_to_json(*e->results).dump(2), "application/json");
      }
    });
  }

  void start_watcher() {
    if (!opt.shutdown || watcher.joinable()) return;
    watcher = std::thread([this] {
      while (!stopping) {
        if (opt.shutdown->cancelled()) {
          stopping = true;
          http.stop();
          break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
    });
  }
};

ApiServer::ApiServer(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
ApiServer::~ApiServer() = default;

bool ApiServer::listen() {
  impl_->start_watcher();
  return impl_->http.listen(impl_->opt.host, impl_->opt.port);
}

int ApiServer::bind_any_port() { return impl_->http.bind_to_any_port(impl_->opt.host); }

bool ApiServer::listen_after_bind() {
  impl_->start_watcher();
  return impl_->http.listen_after_bind();
}

void ApiServer::stop() {
  impl_->stopping = true;
  impl_->http.stop();
}

void ApiServer::wait_idle() {
  std::vector<std::shared_ptr<Experiment>> all;
  {
    std::lock_guard lock(impl_->mu);
    for (auto& [_, e] : impl_->experiments) all.push_back(e);
  }
  for (auto& e : all) {
    std::unique_lock lock(e->mu);
    e->cv.wait(lock, [&] { return e->finished(); });
  }
}

}  // namespace cvabench::server
