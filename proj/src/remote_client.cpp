#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "hybridrec/errors.hpp"
#include "hybridrec/llmlink.hpp"

namespace hybridrec {

using json = nlohmann::ordered_json;

void LLMClientConfig::apply_environment() {
  if (const char* url = std::getenv("HYBRIDREC_LLM_URL"); url && *url) endpoint = url;
  if (const char* key = std::getenv("HYBRIDREC_LLM_KEY"); key && *key) api_key = key;
}

void LLMClientConfig::validate() const {
  if (endpoint.empty()) throw ArgumentError("LLM endpoint URL is not configured");
  if (timeout_ms <= 0) throw DomainError("timeout_ms must be positive");
  if (max_in_flight < 1) throw DomainError("max_in_flight must be >= 1");
  if (max_retries < 0) throw DomainError("max_retries must be >= 0");
  if (max_tokens < 1) throw DomainError("max_tokens must be >= 1");
}

std::string completion_request_body(const LLMClientConfig& config, std::string_view prompt) {
  json body;
  body["model"] = config.model;
  body["prompt"] = std::string(prompt);
  body["temperature"] = LLMClientConfig::kTemperature;
  body["max_tokens"] = config.max_tokens;
  return body.dump();
}

std::string completion_text_from_body(std::string_view body) {
  const auto doc = json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw TransportError("response body is not JSON", 1);
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty() ||
      !(*choices)[0].contains("text") || !(*choices)[0]["text"].is_string()) {
    throw TransportError("response body has no choices[0].text", 1);
  }
  return (*choices)[0]["text"].get<std::string>();
}

namespace {

enum class Failure { Transport, Timeout, RateLimited };

[[noreturn]] void raise(Failure kind, const std::string& what, int attempts) {
  switch (kind) {
    case Failure::Timeout: throw Timeout(what, attempts);
    case Failure::RateLimited: throw RateLimited(what, attempts);
    case Failure::Transport: break;
  }
  throw TransportError(what, attempts);
}

}  // namespace

RemoteLlmClient::RemoteLlmClient(LLMClientConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& url = config_.endpoint;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ArgumentError("endpoint URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

RemoteLlmClient::~RemoteLlmClient() = default;

LLMResponse RemoteLlmClient::complete(const CompletionRequest& request) {
  return send(request, 0);
}

LLMResponse RemoteLlmClient::send(const CompletionRequest& request, std::uint64_t request_id) {
  httplib::Client cli(scheme_host_port_);
  const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);

  httplib::Headers headers = {{"X-Request-Id", std::to_string(request_id)}};
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  const auto body = completion_request_body(config_, request.prompt);

  const auto started = std::chrono::steady_clock::now();
  Failure last = Failure::Transport;
  std::string last_what;
  const int max_attempts = config_.max_retries + 1;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    auto res = cli.Post(path_, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      last = (err == httplib::Error::Read || err == httplib::Error::Write ||
              err == httplib::Error::ConnectionTimeout)
                 ? Failure::Timeout
                 : Failure::Transport;
      last_what = "request to " + config_.endpoint + " failed: " + httplib::to_string(err);
    } else if (res->status == 200) {
      std::string text;
      try {
        text = completion_text_from_body(res->body);
      } catch (const TransportError&) {
        raise(Failure::Transport, "malformed completion body from " + config_.endpoint, attempt);
      }
      const auto elapsed = std::chrono::duration<double, std::milli>(
          std::chrono::steady_clock::now() - started);
      return LLMResponse{std::move(text), elapsed.count(), attempt};
    } else if (res->status == 429) {
      last = Failure::RateLimited;
      last_what = "endpoint returned 429";
    } else if (res->status >= 500) {
      last = Failure::Transport;
      last_what = "endpoint returned " + std::to_string(res->status);
    } else {
      raise(Failure::Transport, "endpoint returned " + std::to_string(res->status), attempt);
    }
    if (attempt < max_attempts) {
      const auto backoff = std::chrono::milliseconds(
          static_cast<long long>(config_.initial_backoff_ms) << std::min(attempt - 1, 10));
      std::this_thread::sleep_for(backoff);
    }
  }
  raise(last, last_what, max_attempts);
}

std::vector<CompletionResult> RemoteLlmClient::complete_batch(
    std::span<const CompletionRequest> requests) {
  std::vector<CompletionResult> out(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto k = next.fetch_add(1); k < requests.size(); k = next.fetch_add(1)) {
      try {
        out[k].response = send(requests[k], k);
      } catch (...) {
        out[k].error = std::current_exception();
      }
    }
  };
  const auto n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(config_.max_in_flight), requests.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  return out;
}

}  // namespace hybridrec
