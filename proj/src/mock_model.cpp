#include "cvabench/mock_model.hpp"

#include <cmath>
#include <sstream>

#include "cvabench/nl_metrics.hpp"
#include "cvabench/text.hpp"

namespace cvabench::llm {

namespace {

std::uint64_t mix(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string between(const std::string& s, const std::string& open, const std::string& close) {
  auto a = s.find(open);
  if (a == std::string::npos) return "";
  a += open.size();
  auto b = s.find(close, a);
  return text::trim(s.substr(a, b == std::string::npos ? std::string::npos : b - a));
}

std::string fenced(const json& spec) { return "```json\n" + spec.dump(2) + "\n```\n"; }

std::string first_sentence(const std::string& s) {
  auto dot = s.find(". ");
  return dot == std::string::npos ? s : s.substr(0, dot + 1);
}

}  // namespace

void MockModel::add_suite(const std::vector<TestCase>& suite) {
  suites_.insert(suites_.end(), suite.begin(), suite.end());
  expected_.clear();
  for (const auto& tc : suites_) {
    for (const auto& t : tc.turns) {
      if (!t.expected.empty()) expected_[t.utterance] = &t.expected.front();
    }
  }
}

void MockModel::add_script(const json& script) {
  for (const auto& [k, v] : script.items()) script_[k] = v.get<std::string>();
}

std::string MockModel::find_utterance(std::string_view prompt) const {
  std::string best;
  std::size_t best_end = 0;
  auto consider = [&](const std::string& u) {
    auto pos = prompt.rfind(u);
    if (pos == std::string_view::npos) return;
    std::size_t end = pos + u.size();
    if (best.empty() || end > best_end || (end == best_end && u.size() > best.size())) {
      best = u;
      best_end = end;
    }
  };
  for (const auto& [u, _] : script_) consider(u);
  for (const auto& [u, _] : expected_) consider(u);
  return best;
}

std::string MockModel::judge(const std::string& prompt) const {
  std::string reference = between(prompt, "<reference_answer>", "</reference_answer>");
  std::string response = between(prompt, "<response_to_grade>", "</response_to_grade>");
  double f1 = nl::nlg_prf(reference, response).f1;
  int score = 1 + static_cast<int>(std::lround(4 * f1));
  if (mix(prompt) % 3 == 0 && score < 5) ++score;
  std::ostringstream why;
  why << "The response shares " << std::lround(100 * f1) << "% of its wording with the reference.";
  return json{{"score", score}, {"rationale", why.str()}}.dump();
}

std::string MockModel::respond(const std::string& model_id, const GenerationRequest& req) const {
  std::string prompt = req.messages.empty() ? "" : req.messages.back().content;
  std::string all = req.system_prompt;
  for (const auto& m : req.messages) all += "\n" + m.content;
  if (prompt.find("<response_to_grade>") != std::string::npos || model_id == "mock-judge") return judge(prompt);

  bool repair = req.messages.size() > 1 && req.messages.back().role == "user" &&
                prompt.find("did not include a valid visualization spec") != std::string::npos;
  std::string utterance = find_utterance(repair ? req.messages.front().content : prompt);
  if (model_id == "mock-scripted") {
    auto it = script_.find(utterance);
    return it == script_.end() ? "I could not find that request in my script." : it->second;
  }
  auto it = expected_.find(utterance);
  if (it == expected_.end()) return "I am not sure which fields you mean. Could you rephrase the request?";
  const ExpectedResponse& e = *it->second;
  json spec = viz_spec_to_json(e.viz_spec);
  std::uint64_t h = mix(model_id + "|" + utterance + "|" + std::to_string(req.replicate) + "|" + all.substr(0, 60));

  if (model_id == "mock-terse") {
    if (!repair && h % 5 == 0) return first_sentence(e.nl_explanation);
    spec.erase("sort");
    spec.erase("filters");
    spec.erase("tooltip");
    if (h % 3 == 0 && spec.value("mark", "") == "bar") spec["mark"] = "point";
    return fenced(spec) + first_sentence(e.nl_explanation);
  }
  if (h % 4 == 0 && spec.contains("encoding") && !spec["encoding"].contains("color") &&
      spec["encoding"].contains("x") && spec["encoding"]["x"].contains("field")) {
    spec["encoding"]["color"] = {{"field", spec["encoding"]["x"]["field"]}};
  }
  std::string extra = h % 2 ? " I assumed totals are sums over all records." : "";
  return "Here is the chart.\n" + fenced(spec) + e.nl_explanation + extra;
}

Completion MockTransport::send(const ProviderConfig&, const ModelRef& model, const GenerationRequest& req,
                               const std::string&) {
  ++calls_;
  Completion c;
  c.text = model_.respond(model.model_id, req);
  std::int64_t prompt_tokens = 0;
  for (const auto& m : req.messages) prompt_tokens += static_cast<std::int64_t>(text::words(m.content).size());
  c.usage = TokenUsage{prompt_tokens, static_cast<std::int64_t>(text::words(c.text).size())};
  c.latency_ms = 1;
  return c;
}

GenerationRequest request_from_body(const json& body) {
  GenerationRequest r;
  for (const auto& m : body.value("messages", json::array())) {
    std::string role = m.value("role", "user");
    std::string content = m.value("content", "");
    if (role == "system") r.system_prompt = content;
    else r.messages.push_back({role, content});
  }
  if (body.contains("system") && body["system"].is_string()) r.system_prompt = body["system"];
  r.decoding.temperature = body.value("temperature", 0.2);
  r.decoding.max_tokens = body.value("max_tokens", 2048);
  if (body.contains("seed") && body["seed"].is_number_integer()) r.decoding.seed = body["seed"].get<std::int64_t>();
  return r;
}

}  // namespace cvabench::llm
