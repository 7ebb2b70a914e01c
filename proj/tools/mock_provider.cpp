#include <httplib.h>

#include <CLI11.hpp>
#include <csignal>
#include <iostream>

#include "cvabench/io.hpp"
#include "cvabench/mock_model.hpp"

using namespace cvabench;

namespace {

httplib::Server* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OpenAI-compatible chat endpoint backed by the deterministic mock models"};
  std::string host = "127.0.0.1";
  int port = 8089;
  std::string suite;
  std::vector<std::string> datasources;
  std::string script;
  app.add_option("--host", host);
  app.add_option("--port", port);
  app.add_option("--testcases", suite, "Suite whose expected answers the mock models draw on");
  app.add_option("--datasource", datasources)->delimiter(',');
  app.add_option("--script", script, "utterance -> reply JSON for mock-scripted");
  CLI11_PARSE(app, argc, argv);

  llm::MockModel model;
  try {
    if (!suite.empty()) {
      std::vector<Datasource> sources;
      for (const auto& d : datasources) sources.push_back(load_datasource(d));
      model.add_suite(load_test_suite(suite, sources));
    }
    if (!script.empty()) model.add_script(load_document(script));
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) std::cerr << v.to_string() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  httplib::Server svr;
  svr.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"body is not JSON"}})", "application/json");
      return;
    }
    auto gen = llm::request_from_body(body);
    auto model_id = body.value("model", "mock-analyst");
    auto text = model.respond(model_id, gen);
    json out = {{"id", "mock"},
                {"object", "chat.completion"},
                {"model", model_id},
                {"choices", json::array({{{"index", 0},
                                          {"message", {{"role", "assistant"}, {"content", text}}},
                                          {"finish_reason", "stop"}}})},
                {"usage", {{"prompt_tokens", 0}, {"completion_tokens", 0}, {"total_tokens", 0}}}};
    res.set_content(out.dump(), "application/json");
  });
  g_server = &svr;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "mock provider on http://" << host << ':' << port << "/v1/chat/completions\n";
  if (!svr.listen(host, port)) {
    std::cerr << "error: cannot bind " << host << ':' << port << '\n';
    return 2;
  }
  return 0;
}
