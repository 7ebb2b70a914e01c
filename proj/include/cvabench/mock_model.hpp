#pragma once

#include <atomic>
#include <map>
#include <string>
#include <vector>

#include "cvabench/llm_gateway.hpp"

namespace cvabench::llm {

/// Deterministic stand-in for real providers, used to record replay fixtures
/// and to run the toolkit offline.
///
///   mock-scripted  returns the scripted reply for the utterance verbatim
///   mock-analyst   answers with the expected spec, occasionally adding a color channel
///   mock-terse     drops sort and filters, sometimes picks another mark, omits the spec on
///                  the first attempt for some utterances
///   mock-judge     grades judge prompts by word overlap with the reference
///
/// Any model id answers judge prompts; other unknown ids behave like mock-analyst.
class MockModel {
 public:
  void add_suite(const std::vector<TestCase>& suite);
  /// utterance -> raw reply
  void add_script(const json& script);

  std::string respond(const std::string& model_id, const GenerationRequest& req) const;

  /// Known utterance whose last occurrence in `prompt` is furthest along.
  std::string find_utterance(std::string_view prompt) const;

 private:
  std::string judge(const std::string& prompt) const;
  std::map<std::string, const ExpectedResponse*> expected_;
  std::vector<TestCase> suites_;
  std::map<std::string, std::string> script_;
};

class MockTransport : public Transport {
 public:
  explicit MockTransport(MockModel model) : model_(std::move(model)) {}
  Completion send(const ProviderConfig& provider, const ModelRef& model, const GenerationRequest& req,
                  const std::string& api_key) override;
  long calls() const { return calls_; }

 private:
  MockModel model_;
  std::atomic<long> calls_{0};
};

/// Parses an openai-chat request body into a generation request.
GenerationRequest request_from_body(const json& body);

}  // namespace cvabench::llm
