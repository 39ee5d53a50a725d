#pragma once

#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hybridrec/llmlink.hpp"

namespace hybridrec::cli {

/// "hybridrec <version>", written into every output directory.
std::string version_stamp();

enum ExitCode : int { kOk = 0, kUsage = 2, kDataError = 3, kTransportError = 4 };

/// Runs one command line (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Answers repeated (prompt, user) requests from memory; only successful
/// completions are kept.
class MemoizingClient final : public LlmClient {
 public:
  explicit MemoizingClient(std::unique_ptr<LlmClient> inner) : inner_(std::move(inner)) {}

  LLMResponse complete(const CompletionRequest& request) override;
  std::vector<CompletionResult> complete_batch(std::span<const CompletionRequest> requests) override;

  [[nodiscard]] std::size_t hits() const { return hits_; }
  [[nodiscard]] std::size_t size() const { return cache_.size(); }

 private:
  static std::string key(const CompletionRequest& request);

  std::unique_ptr<LlmClient> inner_;
  std::unordered_map<std::string, LLMResponse> cache_;
  std::size_t hits_ = 0;
};

}  // namespace hybridrec::cli
