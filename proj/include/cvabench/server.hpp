#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "cvabench/eval.hpp"
#include "cvabench/llm_gateway.hpp"

namespace cvabench::server {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "cvabench-data";
  std::filesystem::path registry_path = "data/registry.json";
  std::filesystem::path rubrics_dir = "data/rubrics";
  std::filesystem::path replay_dir;
  llm::ReplayMode mode = llm::ReplayMode::off;
  std::string token;  // when set, requests must carry it in X-Api-Token
  bool mock = false;
  std::shared_ptr<llm::Transport> transport;  // replaces the HTTP or mock transport when set
  int workers = 4;
  const eval::CancelToken* shutdown = nullptr;  // polled; stops the listener when flipped
};

enum class ExperimentState { created, running, stopped, complete, failed };
std::string_view to_string(ExperimentState s);

/// HTTP API over the evaluation engine. Experiments run on background threads
/// and append their events to <data_dir>/experiments/<id>/events.jsonl.
class ApiServer {
 public:
  explicit ApiServer(ServerOptions options);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds and serves until stop(). Returns false when the address cannot be bound.
  bool listen();
  /// Binds to an ephemeral port on the configured host; returns it or -1.
  int bind_any_port();
  /// Serves on a socket obtained from bind_any_port().
  bool listen_after_bind();
  void stop();
  /// Blocks until every experiment thread has finished.
  void wait_idle();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cvabench::server
