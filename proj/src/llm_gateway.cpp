#include "cvabench/llm_gateway.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <random>
#include <set>
#include <thread>

#include "cvabench/text.hpp"

namespace cvabench::llm {

// ---------------------------------------------------------------------------
// registry

const ProviderConfig* Registry::provider(std::string_view id) const {
  for (const auto& p : providers) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

const RegistryModel* Registry::find(std::string_view provider_id, std::string_view model_id) const {
  for (const auto& m : models) {
    if (m.ref.provider_id == provider_id && m.ref.model_id == model_id) return &m;
  }
  return nullptr;
}

ModelRef Registry::complete_ref(const ModelRef& m) const {
  ModelRef out = m;
  if (const auto* r = find(m.provider_id, m.model_id)) {
    if (out.family.empty()) out.family = r->ref.family;
    if (out.display_name.empty()) out.display_name = r->ref.display_name;
  }
  if (out.display_name.empty()) out.display_name = out.model_id;
  return out;
}

Registry parse_registry(const json& j, const std::string& origin) {
  std::vector<Violation> v;
  auto err = [&](const std::string& path, const std::string& msg) {
    v.push_back({Severity::error, origin, path, "registry", msg});
  };
  Registry r;
  if (!j.is_object()) {
    err("", "registry must be an object with providers and models");
    throw ValidationError(v);
  }
  const json providers = j.value("providers", json::array());
  for (std::size_t i = 0; i < providers.size(); ++i) {
    const auto& pj = providers[i];
    std::string path = "providers[" + std::to_string(i) + "]";
    ProviderConfig p;
    p.id = pj.value("id", "");
    p.kind = pj.value("kind", "openai-chat");
    p.base_url = pj.value("baseUrl", "");
    p.path = pj.value("path", p.kind == "anthropic-messages" ? "/v1/messages" : "/v1/chat/completions");
    p.api_key_env = pj.value("apiKeyEnv", "");
    p.requires_key = pj.value("requiresKey", true);
    p.concurrency = pj.value("concurrency", 4);
    p.timeout_s = pj.value("timeoutSeconds", 120.0);
    if (p.id.empty()) err(path + ".id", "provider id is required");
    if (p.base_url.empty()) err(path + ".baseUrl", "provider baseUrl is required");
    if (p.kind != "openai-chat" && p.kind != "anthropic-messages") {
      err(path + ".kind", "unknown provider kind \"" + p.kind + "\"; use openai-chat or anthropic-messages");
    }
    if (p.concurrency < 1) err(path + ".concurrency", "concurrency must be at least 1");
    if (r.provider(p.id)) err(path + ".id", "duplicate provider id \"" + p.id + "\"");
    r.providers.push_back(std::move(p));
  }
  const json models = j.value("models", json::array());
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& mj = models[i];
    std::string path = "models[" + std::to_string(i) + "]";
    RegistryModel m;
    m.ref.provider_id = mj.value("providerId", "");
    m.ref.model_id = mj.value("modelId", "");
    m.ref.family = mj.value("family", "");
    m.ref.display_name = mj.value("displayName", m.ref.model_id);
    m.strength = mj.value("strength", 0.0);
    if (m.ref.model_id.empty()) err(path + ".modelId", "modelId is required");
    if (!r.provider(m.ref.provider_id)) err(path + ".providerId", "unknown provider \"" + m.ref.provider_id + "\"");
    if (m.ref.family.empty()) err(path + ".family", "family is required");
    if (r.find(m.ref.provider_id, m.ref.model_id)) err(path, "duplicate model " + m.ref.key());
    r.models.push_back(std::move(m));
  }
  if (!v.empty()) throw ValidationError(v);
  return r;
}

Registry load_registry(const std::filesystem::path& path) { return parse_registry(load_document(path), path.string()); }

json registry_to_json(const Registry& r) {
  json j;
  j["providers"] = json::array();
  for (const auto& p : r.providers) {
    j["providers"].push_back({{"id", p.id},
                              {"kind", p.kind},
                              {"baseUrl", p.base_url},
                              {"path", p.path},
                              {"apiKeyEnv", credential_env_name(p)},
                              {"requiresKey", p.requires_key},
                              {"concurrency", p.concurrency},
                              {"timeoutSeconds", p.timeout_s}});
  }
  j["models"] = json::array();
  for (const auto& m : r.models) {
    j["models"].push_back({{"providerId", m.ref.provider_id},
                           {"modelId", m.ref.model_id},
                           {"family", m.ref.family},
                           {"displayName", m.ref.display_name},
                           {"strength", m.strength}});
  }
  return j;
}

std::string credential_env_name(const ProviderConfig& p) {
  if (!p.api_key_env.empty()) return p.api_key_env;
  std::string id;
  for (char c : p.id) id.push_back(std::isalnum(static_cast<unsigned char>(c)) ? std::toupper(c) : '_');
  return "PROVIDER_" + id + "_API_KEY";
}

// ---------------------------------------------------------------------------
// wire shapes

json request_body(const ProviderConfig& provider, const ModelRef& model, const GenerationRequest& req) {
  json msgs = json::array();
  json body;
  body["model"] = model.model_id;
  body["temperature"] = req.decoding.temperature;
  body["max_tokens"] = req.decoding.max_tokens;
  if (provider.kind == "anthropic-messages") {
    if (!req.system_prompt.empty()) body["system"] = req.system_prompt;
    for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  } else {
    if (!req.system_prompt.empty()) msgs.push_back({{"role", "system"}, {"content", req.system_prompt}});
    for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    if (req.decoding.seed) body["seed"] = *req.decoding.seed;
  }
  body["messages"] = msgs;
  return body;
}

Completion parse_completion(const ProviderConfig& provider, const json& body) {
  Completion c;
  try {
    if (provider.kind == "anthropic-messages") {
      for (const auto& part : body.at("content")) {
        if (part.value("type", "text") == "text") c.text += part.value("text", "");
      }
      if (auto u = body.find("usage"); u != body.end() && u->is_object()) {
        c.usage = TokenUsage{u->value("input_tokens", 0), u->value("output_tokens", 0)};
      }
    } else {
      const auto& msg = body.at("choices").at(0).at("message");
      if (msg.at("content").is_string()) c.text = msg.at("content").get<std::string>();
      if (auto u = body.find("usage"); u != body.end() && u->is_object()) {
        c.usage = TokenUsage{u->value("prompt_tokens", 0), u->value("completion_tokens", 0)};
      }
    }
  } catch (const json::exception& e) {
    throw ProviderError(502, std::string("unexpected response shape: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// replay

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

json replay_key_material(const ModelRef& model, const GenerationRequest& req) {
  json msgs = json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  json j = {{"provider", model.provider_id},
            {"model", model.model_id},
            {"system", req.system_prompt},
            {"messages", msgs},
            {"temperature", req.decoding.temperature},
            {"maxTokens", req.decoding.max_tokens},
            {"replicate", req.replicate}};
  if (req.decoding.seed) j["seed"] = *req.decoding.seed;
  if (!req.cache_salt.empty()) j["salt"] = req.cache_salt;
  return j;
}

std::string replay_key(const ModelRef& model, const GenerationRequest& req) {
  return sha256_hex(replay_key_material(model, req).dump());
}

std::optional<ReplayMode> parse_replay_mode(std::string_view s) {
  auto k = text::to_lower(s);
  if (k == "off") return ReplayMode::off;
  if (k == "replay") return ReplayMode::replay;
  if (k == "record") return ReplayMode::record;
  if (k == "auto") return ReplayMode::auto_;
  return std::nullopt;
}

std::string_view to_string(ReplayMode m) {
  switch (m) {
    case ReplayMode::off:
      return "off";
    case ReplayMode::replay:
      return "replay";
    case ReplayMode::record:
      return "record";
    case ReplayMode::auto_:
      return "auto";
  }
  return "auto";
}

std::filesystem::path ReplayStore::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<Completion> ReplayStore::get(const std::string& key) const {
  auto p = path_for(key);
  std::error_code ec;
  if (!std::filesystem::exists(p, ec)) return std::nullopt;
  auto j = json::parse(read_file(p), nullptr, false);
  if (j.is_discarded() || !j.contains("response")) return std::nullopt;
  const auto& r = j["response"];
  Completion c;
  c.text = r.value("text", "");
  c.latency_ms = r.value("latencyMs", 0.0);
  if (auto u = r.find("usage"); u != r.end() && u->is_object()) {
    c.usage = TokenUsage{u->value("promptTokens", 0), u->value("completionTokens", 0)};
  }
  return c;
}

void ReplayStore::put(const std::string& key, const json& material, const Completion& c) const {
  json r = {{"text", c.text}, {"latencyMs", c.latency_ms}};
  if (c.usage) r["usage"] = {{"promptTokens", c.usage->prompt_tokens}, {"completionTokens", c.usage->completion_tokens}};
  json doc = {{"key", key}, {"request", material}, {"response", r}};
  auto p = path_for(key);
  std::filesystem::create_directories(p.parent_path());
  write_file_atomic(p, doc.dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// gateway

void Limiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_use_ < capacity_; });
  ++in_use_;
  int seen = peak_.load();
  while (in_use_ > seen && !peak_.compare_exchange_weak(seen, in_use_)) {
  }
}

void Limiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_use_;
  }
  cv_.notify_one();
}

Gateway::Gateway(Registry registry, GatewayOptions options, std::shared_ptr<Transport> transport)
    : registry_(std::move(registry)), options_(std::move(options)), transport_(std::move(transport)) {
  if (!transport_) transport_ = std::make_shared<HttpTransport>();
  if (!options_.sleeper) options_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!options_.env) {
    options_.env = [](const std::string& name) -> std::optional<std::string> {
      const char* v = std::getenv(name.c_str());
      if (!v || !*v) return std::nullopt;
      return std::string(v);
    };
  }
  if (options_.mode != ReplayMode::off) {
    if (options_.replay_dir.empty()) throw ConfigError("replay mode " + std::string(to_string(options_.mode)) +
                                                       " needs a replay directory");
    store_.emplace(options_.replay_dir);
  }
  for (const auto& p : registry_.providers) limiters_[p.id] = std::make_unique<Limiter>(p.concurrency);
}

Limiter& Gateway::limiter_for(const ProviderConfig& p) {
  std::lock_guard lock(limiters_mu_);
  auto& l = limiters_[p.id];
  if (!l) l = std::make_unique<Limiter>(p.concurrency);
  return *l;
}

int Gateway::peak_concurrency(const std::string& provider_id) const {
  std::lock_guard lock(limiters_mu_);
  auto it = limiters_.find(provider_id);
  return it == limiters_.end() ? 0 : it->second->peak();
}

void Gateway::check_ready(const ModelRef& model) const {
  const auto* p = registry_.provider(model.provider_id);
  if (!p) throw ConfigError("unknown provider \"" + model.provider_id + "\" for model " + model.key());
  if (options_.mode == ReplayMode::replay || !p->requires_key) return;
  if (!options_.env(credential_env_name(*p))) {
    throw ConfigError("missing credential for provider \"" + p->id + "\": set " + credential_env_name(*p));
  }
}

Completion Gateway::send_with_retries(const ProviderConfig& p, const ModelRef& model, const GenerationRequest& req) {
  std::string key;
  if (p.requires_key) key = options_.env(credential_env_name(p)).value_or("");
  auto& limiter = limiter_for(p);
  thread_local std::mt19937_64 rng{std::random_device{}()};
  for (int attempt = 1;; ++attempt) {
    limiter.acquire();
    try {
      stats_.network_calls++;
      auto t0 = std::chrono::steady_clock::now();
      Completion c = transport_->send(p, model, req, key);
      if (c.latency_ms <= 0) {
        c.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      }
      limiter.release();
      return c;
    } catch (const ProviderError& e) {
      limiter.release();
      if (e.status() == 401 || e.status() == 403) {
        throw ConfigError("provider \"" + p.id + "\" rejected the credential (" + std::to_string(e.status()) +
                          "): " + e.what());
      }
      if (!e.retryable() || attempt >= options_.max_attempts) throw;
    } catch (...) {
      limiter.release();
      throw;
    }
    stats_.retries++;
    double factor = 1.0 + options_.jitter * std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    auto delay = options_.base_backoff * (1 << (attempt - 1));
    options_.sleeper(std::chrono::milliseconds(static_cast<long>(delay.count() * factor)));
  }
}

Completion Gateway::complete(const ModelRef& model, const GenerationRequest& req) {
  const auto* p = registry_.provider(model.provider_id);
  if (!p) throw ConfigError("unknown provider \"" + model.provider_id + "\" for model " + model.key());
  json material = replay_key_material(model, req);
  std::string key = sha256_hex(material.dump());
  if (store_ && (options_.mode == ReplayMode::replay || options_.mode == ReplayMode::auto_)) {
    if (auto hit = store_->get(key)) {
      stats_.replay_hits++;
      return *hit;
    }
    if (options_.mode == ReplayMode::replay) {
      throw ReplayMiss("no recorded response for " + model.key() + " (key " + key + ")");
    }
  }
  check_ready(model);
  Completion c = send_with_retries(*p, model, req);
  if (store_ && (options_.mode == ReplayMode::record || options_.mode == ReplayMode::auto_)) store_->put(key, material, c);
  return c;
}

ModelResponse Gateway::generate(const ModelRef& model, const GenerationRequest& req) {
  ModelResponse r;
  Completion first = complete(model, req);
  r.raw_output = first.text;
  r.latency_ms = first.latency_ms;
  r.token_usage = first.usage;
  auto ex = extract_response(first.text);
  if (ex.viz_spec) {
    r.viz_spec = std::move(ex.viz_spec);
    r.nl_text = ex.nl_text;
    r.parse_status = ParseStatus::ok;
    return r;
  }
  r.nl_text = ex.nl_text;
  r.parse_status = ParseStatus::failed;

  GenerationRequest repair = req;
  repair.messages.push_back({"assistant", first.text});
  repair.messages.push_back({"user",
                             "Your reply did not include a valid visualization spec. Reply again with the spec as "
                             "one JSON object in a ```json code block, followed by your explanation."});
  Completion second;
  try {
    second = complete(model, repair);
  } catch (const ReplayMiss&) {
    return r;
  }
  r.latency_ms += second.latency_ms;
  if (second.usage) {
    TokenUsage u = r.token_usage.value_or(TokenUsage{});
    u.prompt_tokens += second.usage->prompt_tokens;
    u.completion_tokens += second.usage->completion_tokens;
    r.token_usage = u;
  }
  r.raw_output = first.text + "\n\n[repair]\n" + second.text;
  auto ex2 = extract_response(second.text);
  if (ex2.viz_spec) {
    r.viz_spec = std::move(ex2.viz_spec);
    if (!text::trim(ex2.nl_text).empty()) r.nl_text = ex2.nl_text;
    r.parse_status = ParseStatus::repaired;
  }
  return r;
}

std::string Gateway::judge(const ModelRef& model, const std::string& prompt, int replicate, const std::string& salt) {
  GenerationRequest req;
  req.cache_salt = salt;
  req.messages.push_back({"user", prompt});
  req.decoding.temperature = kJudgeTemperature;
  req.decoding.max_tokens = 512;
  req.decoding.seed = 7;
  req.replicate = replicate;
  return complete(model, req).text;
}

// ---------------------------------------------------------------------------
// extraction

namespace {

bool looks_like_spec(const json& j) { return j.is_object() && (j.contains("mark") || j.contains("encoding")); }

// End index (exclusive) of the balanced object starting at `open`, honoring strings.
std::optional<std::size_t> balanced_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_str = false, esc = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (in_str) {
      if (esc) esc = false;
      else if (c == '\\') esc = true;
      else if (c == '"') in_str = false;
      continue;
    }
    if (c == '"') in_str = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::nullopt;
}

std::string tidy_prose(std::string s) {
  std::string out;
  int newlines = 0;
  for (char c : s) {
    if (c == '\n') {
      if (++newlines > 2) continue;
    } else if (c != '\r' && c != ' ' && c != '\t') {
      newlines = 0;
    }
    out.push_back(c);
  }
  return text::trim(out);
}

struct Candidate {
  json doc;
  std::size_t begin, end;
};

}  // namespace

Extraction extract_response(std::string_view raw) {
  Extraction ex;
  std::vector<Candidate> cands;
  // Fenced blocks first.
  for (std::size_t pos = raw.find("```"); pos != std::string_view::npos;) {
    std::size_t body = raw.find('\n', pos);
    if (body == std::string_view::npos) break;
    std::size_t close = raw.find("```", body);
    if (close == std::string_view::npos) break;
    auto j = json::parse(raw.substr(body + 1, close - body - 1), nullptr, false);
    if (!j.is_discarded()) cands.push_back({j, pos, close + 3});
    pos = raw.find("```", close + 3);
  }
  if (cands.empty()) {
    for (std::size_t open = raw.find('{'); open != std::string_view::npos; open = raw.find('{', open + 1)) {
      auto end = balanced_end(raw, open);
      if (!end) continue;
      auto j = json::parse(raw.substr(open, *end - open), nullptr, false);
      if (j.is_discarded() || !j.is_object()) continue;
      cands.push_back({j, open, *end});
      open = *end - 1;
    }
  }
  for (const auto& c : cands) {
    const json* spec = nullptr;
    std::string explanation;
    if (looks_like_spec(c.doc)) {
      spec = &c.doc;
    } else if (c.doc.is_object()) {
      for (const char* k : {"vizSpec", "spec", "visualization"}) {
        if (auto it = c.doc.find(k); it != c.doc.end() && looks_like_spec(*it)) {
          spec = &*it;
          break;
        }
      }
      for (const char* k : {"explanation", "nlExplanation", "nlText", "text"}) {
        if (auto it = c.doc.find(k); it != c.doc.end() && it->is_string()) {
          explanation = it->get<std::string>();
          break;
        }
      }
    }
    if (!spec) continue;
    std::vector<Violation> issues;
    VizSpec parsed = parse_viz_spec(*spec, issues, "vizSpec");
    bool fatal = std::any_of(issues.begin(), issues.end(), [](const Violation& v) { return v.severity == Severity::error; });
    ex.issues.insert(ex.issues.end(), issues.begin(), issues.end());
    if (fatal) continue;
    ex.viz_spec = std::move(parsed);
    std::string prose = std::string(raw.substr(0, c.begin)) + "\n" + std::string(raw.substr(c.end));
    prose = tidy_prose(prose);
    if (!explanation.empty()) prose = prose.empty() ? explanation : explanation + "\n\n" + prose;
    ex.nl_text = prose;
    return ex;
  }
  ex.nl_text = tidy_prose(std::string(raw));
  return ex;
}

// ---------------------------------------------------------------------------
// prompts

std::string render_prompt(std::string_view tmpl, const PromptBindings& b) {
  std::vector<Violation> v;
  for (const auto& name : missing_placeholders(tmpl)) {
    v.push_back({Severity::error, "", "systemPrompt", "placeholder", "template missing required placeholder: " + name});
  }
  static const std::set<std::string> known = {"datasource", "utterance", "output-schema", "prior-turns"};
  bool has_prior = false;
  for (std::size_t i = tmpl.find('{'); i != std::string_view::npos; i = tmpl.find('{', i + 1)) {
    std::size_t j = i + 1;
    while (j < tmpl.size() && (std::islower(static_cast<unsigned char>(tmpl[j])) || tmpl[j] == '-' || tmpl[j] == '_' ||
                               std::isdigit(static_cast<unsigned char>(tmpl[j])))) {
      ++j;
    }
    if (j == i + 1 || j >= tmpl.size() || tmpl[j] != '}') continue;
    std::string name(tmpl.substr(i + 1, j - i - 1));
    if (name == "prior-turns") has_prior = true;
    if (!known.count(name)) {
      v.push_back({Severity::error, "", "systemPrompt", "placeholder", "unknown placeholder: {" + name + "}"});
    }
  }
  if (!v.empty()) throw ValidationError(v);

  std::string transcript;
  for (std::size_t i = 0; i < b.prior_turns.size(); ++i) {
    transcript += "Turn " + std::to_string(i + 1) + " user: " + b.prior_turns[i].first + "\n";
    if (!b.prior_turns[i].second.empty()) {
      transcript += "Turn " + std::to_string(i + 1) + " assistant: " + b.prior_turns[i].second + "\n";
    }
  }
  std::string utterance = b.utterance;
  if (!has_prior && !transcript.empty()) {
    utterance = "Earlier in this conversation:\n" + transcript + "Current request: " + b.utterance;
  }
  std::map<std::string, std::string> values = {{"datasource", b.datasource},
                                               {"utterance", utterance},
                                               {"output-schema", b.output_schema},
                                               {"prior-turns", transcript}};
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl[i] == '{') {
      auto close = tmpl.find('}', i);
      if (close != std::string_view::npos) {
        auto it = values.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

const json& output_schema() {
  static const json schema = json::parse(R"({
  "type": "object",
  "required": ["mark", "encoding"],
  "properties": {
    "mark": {"enum": ["bar", "line", "area", "point", "pie", "histogram", "boxplot", "table", "heatmap"]},
    "encoding": {
      "type": "object",
      "description": "Channels x, y, color, shape, opacity, size, text",
      "additionalProperties": {
        "type": "object",
        "properties": {
          "field": {"type": "string"},
          "aggregate": {"enum": ["sum", "mean", "count", "min", "max", "median"]},
          "scale": {"type": "object", "properties": {
            "type": {"enum": ["linear", "log", "sqrt", "ordinal", "time"]},
            "zero": {"type": "boolean"}}}
        }
      }
    },
    "tooltip": {"type": "array", "items": {"type": "object", "required": ["field"], "properties": {
      "field": {"type": "string"}, "aggregate": {"type": "string"}, "format": {"type": "string"}}}},
    "filters": {"type": "array", "items": {"type": "object", "required": ["field", "op"], "properties": {
      "field": {"type": "string"},
      "op": {"enum": ["eq", "neq", "in", "range", "top-n", "not-null"]},
      "values": {"type": "array"},
      "measure": {"type": "string"}}}},
    "sort": {"type": "object", "properties": {
      "field": {"type": "string"}, "order": {"enum": ["ascending", "descending"]}}},
    "interactions": {"type": "array", "items": {"enum": ["selection", "zoom", "pan", "drilldown"]}}
  }
})");
  return schema;
}

JudgeRecommendation recommend_judge(const std::vector<ModelRef>& candidates, const Registry& registry) {
  JudgeRecommendation out;
  std::set<std::string> families;
  for (const auto& c : candidates) {
    auto full = registry.complete_ref(c);
    if (!full.family.empty()) families.insert(text::to_lower(full.family));
  }
  std::vector<const RegistryModel*> ranked;
  for (const auto& m : registry.models) ranked.push_back(&m);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RegistryModel* a, const RegistryModel* b) { return a->strength > b->strength; });
  if (ranked.empty()) return out;
  for (const auto* m : ranked) {
    if (!families.count(text::to_lower(m->ref.family))) {
      out.model = m->ref;
      return out;
    }
  }
  out.model = ranked.front()->ref;
  out.self_preference_warning = true;
  return out;
}

}  // namespace cvabench::llm
