#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>

#include "cvabench/llm_gateway.hpp"

namespace cvabench::llm {

Completion HttpTransport::send(const ProviderConfig& provider, const ModelRef& model, const GenerationRequest& req,
                               const std::string& api_key) {
  httplib::Client cli(provider.base_url);
  auto secs = static_cast<time_t>(provider.timeout_s);
  cli.set_connection_timeout(10, 0);
  cli.set_read_timeout(secs, 0);
  cli.set_write_timeout(secs, 0);

  httplib::Headers headers;
  if (provider.kind == "anthropic-messages") {
    if (!api_key.empty()) headers.emplace("x-api-key", api_key);
    headers.emplace("anthropic-version", "2023-06-01");
  } else if (!api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + api_key);
  }

  auto body = request_body(provider, model, req).dump();
  auto t0 = std::chrono::steady_clock::now();
  auto res = cli.Post(provider.path, headers, body, "application/json");
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (!res) throw ProviderError(0, "request to " + provider.id + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw ProviderError(res->status, provider.id + " returned HTTP " + std::to_string(res->status) + ": " +
                                         res->body.substr(0, 300));
  }
  auto j = json::parse(res->body, nullptr, false);
  if (j.is_discarded()) throw ProviderError(502, provider.id + " returned a non-JSON body");
  Completion c = parse_completion(provider, j);
  c.latency_ms = ms;
  return c;
}

}  // namespace cvabench::llm
