#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvabench/io.hpp"
#include "cvabench/model.hpp"

namespace cvabench::llm {

struct ProviderConfig {
  std::string id;
  std::string kind = "openai-chat";  // openai-chat | anthropic-messages
  std::string base_url;
  std::string path;
  std::string api_key_env;  // empty -> PROVIDER_<ID>_API_KEY
  bool requires_key = true;
  int concurrency = 4;
  double timeout_s = 120;
};

struct RegistryModel {
  ModelRef ref;
  double strength = 0;
};

struct Registry {
  std::vector<ProviderConfig> providers;
  std::vector<RegistryModel> models;

  const ProviderConfig* provider(std::string_view id) const;
  const RegistryModel* find(std::string_view provider_id, std::string_view model_id) const;
  /// Fills family/displayName from the registry entry when the reference omits them.
  ModelRef complete_ref(const ModelRef& m) const;
};

Registry parse_registry(const json& j, const std::string& origin = "");
Registry load_registry(const std::filesystem::path& path);
json registry_to_json(const Registry& r);

/// Environment variable holding a provider's key: PROVIDER_<ID>_API_KEY unless overridden.
std::string credential_env_name(const ProviderConfig& p);

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct Decoding {
  double temperature = 0.2;
  int max_tokens = 2048;
  std::optional<std::int64_t> seed;
};

inline constexpr double kCandidateTemperature = 0.2;
inline constexpr double kJudgeTemperature = 0.0;

struct GenerationRequest {
  std::string system_prompt;
  std::vector<ChatMessage> messages;
  json output_schema;
  Decoding decoding;
  int replicate = 0;  // part of the replay key so replications stay distinct
  std::string cache_salt;  // replay key only, never sent; keeps cells with identical text apart
};

struct Completion {
  std::string text;
  std::optional<TokenUsage> usage;
  double latency_ms = 0;
};

/// Transport-level failure. `status` is the HTTP status or 0 for network errors.
class ProviderError : public std::runtime_error {
 public:
  ProviderError(int status, std::string message)
      : std::runtime_error(std::move(message)), status_(status) {}
  int status() const { return status_; }
  bool retryable() const { return status_ == 0 || status_ == 408 || status_ == 429 || status_ >= 500; }

 private:
  int status_;
};

/// Missing credentials, auth rejection or unknown provider; never retried.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReplayMiss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual Completion send(const ProviderConfig& provider, const ModelRef& model, const GenerationRequest& req,
                          const std::string& api_key) = 0;
};

/// Chat-completion over HTTP(S) for the openai-chat and anthropic-messages wire shapes.
class HttpTransport : public Transport {
 public:
  Completion send(const ProviderConfig& provider, const ModelRef& model, const GenerationRequest& req,
                  const std::string& api_key) override;
};

json request_body(const ProviderConfig& provider, const ModelRef& model, const GenerationRequest& req);
Completion parse_completion(const ProviderConfig& provider, const json& body);

std::string sha256_hex(std::string_view data);
/// Canonical request description used for replay keys.
json replay_key_material(const ModelRef& model, const GenerationRequest& req);
std::string replay_key(const ModelRef& model, const GenerationRequest& req);

enum class ReplayMode { off, replay, record, auto_ };
std::optional<ReplayMode> parse_replay_mode(std::string_view s);
std::string_view to_string(ReplayMode m);

/// Content-addressed store: <dir>/<key[0:2]>/<key>.json
class ReplayStore {
 public:
  explicit ReplayStore(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::optional<Completion> get(const std::string& key) const;
  void put(const std::string& key, const json& material, const Completion& c) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& key) const;
  std::filesystem::path dir_;
};

/// Counting admission gate that also records the peak number of holders.
class Limiter {
 public:
  explicit Limiter(int capacity) : capacity_(capacity < 1 ? 1 : capacity) {}
  void acquire();
  void release();
  int peak() const { return peak_.load(); }
  int capacity() const { return capacity_; }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int capacity_;
  int in_use_ = 0;
  std::atomic<int> peak_{0};
};

struct GatewayOptions {
  ReplayMode mode = ReplayMode::auto_;
  std::filesystem::path replay_dir;
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{1000};
  double jitter = 0.25;  // +-25%
  std::function<void(std::chrono::milliseconds)> sleeper;  // default: sleep_for
  std::function<std::optional<std::string>(const std::string&)> env;  // default: getenv
};

struct GatewayStats {
  std::atomic<long> replay_hits{0};
  std::atomic<long> network_calls{0};
  std::atomic<long> retries{0};
};

struct Extraction {
  std::optional<VizSpec> viz_spec;
  std::string nl_text;
  std::vector<Violation> issues;
};

/// Pulls the spec from a fenced block, a {vizSpec, explanation} envelope or
/// the first balanced JSON object; the remaining prose becomes nl_text.
Extraction extract_response(std::string_view raw);

class Gateway {
 public:
  Gateway(Registry registry, GatewayOptions options, std::shared_ptr<Transport> transport = nullptr);

  /// One chat completion through replay, admission control and retries.
  Completion complete(const ModelRef& model, const GenerationRequest& req);

  /// Candidate generation: extraction plus one repair re-ask on failure.
  ModelResponse generate(const ModelRef& model, const GenerationRequest& req);

  /// Judge call with temperature 0 and the prompt as a single user message.
  std::string judge(const ModelRef& model, const std::string& prompt, int replicate = 0, const std::string& salt = "");

  /// Fails fast when a provider is unknown or its credential is missing.
  void check_ready(const ModelRef& model) const;

  const Registry& registry() const { return registry_; }
  const GatewayStats& stats() const { return stats_; }
  int peak_concurrency(const std::string& provider_id) const;

 private:
  Completion send_with_retries(const ProviderConfig& p, const ModelRef& model, const GenerationRequest& req);
  Limiter& limiter_for(const ProviderConfig& p);

  Registry registry_;
  GatewayOptions options_;
  std::shared_ptr<Transport> transport_;
  std::optional<ReplayStore> store_;
  mutable std::mutex limiters_mu_;
  std::map<std::string, std::unique_ptr<Limiter>> limiters_;
  GatewayStats stats_;
};

struct PromptBindings {
  std::string datasource;
  std::string utterance;
  std::string output_schema;
  std::vector<std::pair<std::string, std::string>> prior_turns;  // (utterance, assistant reply)
};

/// Substitutes {datasource}, {utterance}, {output-schema} and {prior-turns}.
/// Prior turns go where {prior-turns} appears, otherwise just before the utterance.
/// Throws ValidationError for missing required or unknown placeholders.
std::string render_prompt(std::string_view tmpl, const PromptBindings& b);

/// JSON schema of the visualization spec the models are asked to produce.
const json& output_schema();

struct JudgeRecommendation {
  std::optional<ModelRef> model;
  bool self_preference_warning = false;
};

/// Strongest registry model whose family no candidate shares; falls back to
/// the strongest overall with a warning when every family is represented.
JudgeRecommendation recommend_judge(const std::vector<ModelRef>& candidates, const Registry& registry);

}  // namespace cvabench::llm
