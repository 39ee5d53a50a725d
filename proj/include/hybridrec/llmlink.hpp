#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hybridrec/corpus.hpp"
#include "hybridrec/types.hpp"

namespace hybridrec {

enum class PromptTask { ListwiseRank, PointwiseRate, RatingPredict, PairRank, NextItemPick, AttributeElicit };

/// Short names used on the command line and in reports: listwise, pointwise,
/// rating, pair, next, attributes.
std::string_view task_name(PromptTask task);
PromptTask parse_task(std::string_view name);

struct HistoryEntry {
  std::string title;
  std::optional<double> rating;

  bool operator==(const HistoryEntry&) const = default;
};

struct PromptContext {
  std::string instruction;
  /// Oldest first.
  std::vector<HistoryEntry> history;
  /// Candidate titles, or the single target for pointwise tasks.
  std::vector<std::string> candidates;
  std::optional<std::vector<HistoryEntry>> similar_user_history;
  std::optional<std::string> conventional_prediction;

  bool operator==(const PromptContext&) const = default;
};

/// Instruction text for a task. `noun` names the item kind ("movie", "book").
std::string default_instruction(PromptTask task, std::string_view noun = "movie",
                                std::span<const std::string> attribute_keys = {});

/// Section lines between the instruction and the output cue, e.g.
///
///   Interaction History: A (1995); B (1979)
///   Candidate Items: C (1996); D (1993)
///   Similar User Interaction History: ...
///   Conventional Model Prediction: ...
///
/// Rating tasks label their history "Rating History" and render entries as
/// "Title: r". Every line ends with '\n'.
std::string render_prompt_input(PromptTask task, const PromptContext& ctx);

/// Full prompt: "Instruction: ...\n" + render_prompt_input() + "Output:".
std::string build_prompt(PromptTask task, const PromptContext& ctx);

inline constexpr std::size_t kDefaultSimilarHistory = 10;

/// Keeps the most recent `max_items` entries of `history`.
PromptContext augment_with_similar_user(PromptContext ctx, std::vector<HistoryEntry> history,
                                        std::size_t max_items = kDefaultSimilarHistory);
PromptContext augment_with_model_prediction(PromptContext ctx, std::string prediction);

/// Shortest round-trip decimal form: 3 -> "3", 3.2 -> "3.2".
std::string format_rating(double r);
std::string join_titles(std::span<const std::string> titles);

// ---------------------------------------------------------------------------
// Completion clients.

/// Structured description of what a prompt asks. Remote endpoints only see
/// the prompt text; the mock oracle answers from this metadata.
struct RequestMeta {
  PromptTask task = PromptTask::ListwiseRank;
  std::optional<UserId> user;
  /// Candidate ids in conventional order, with their display titles.
  std::vector<ItemId> candidates;
  std::vector<std::string> candidate_titles;
  std::vector<std::string> attribute_keys;
};

struct CompletionRequest {
  std::string prompt;
  RequestMeta meta;
};

struct LLMResponse {
  /// The completion exactly as returned.
  std::string text;
  double latency_ms = 0.0;
  int attempts = 1;
};

/// Either a response or the exception the request ended with.
struct CompletionResult {
  std::optional<LLMResponse> response;
  std::exception_ptr error;

  [[nodiscard]] bool ok() const { return response.has_value(); }
  /// The response, rethrowing the stored error if there is none.
  [[nodiscard]] const LLMResponse& value() const;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual LLMResponse complete(const CompletionRequest& request) = 0;
  /// Results come back in request order. The default runs sequentially.
  virtual std::vector<CompletionResult> complete_batch(std::span<const CompletionRequest> requests);
};

struct LLMClientConfig {
  std::string endpoint;
  std::string model = "llama-2-7b-rec";
  std::string api_key;
  int timeout_ms = 30000;
  int max_in_flight = 4;
  int max_retries = 3;
  int max_tokens = 256;
  int initial_backoff_ms = 200;

  /// Decoding is greedy; every request body carries this value.
  static constexpr double kTemperature = 0.0;

  /// Fills endpoint and api_key from HYBRIDREC_LLM_URL / HYBRIDREC_LLM_KEY
  /// when those are set.
  void apply_environment();
  void validate() const;
};

/// JSON request body sent to the endpoint:
/// {"model":..., "prompt":..., "temperature":0, "max_tokens":...}
std::string completion_request_body(const LLMClientConfig& config, std::string_view prompt);
/// Completion text at choices[0].text of a response body.
std::string completion_text_from_body(std::string_view body);

/// HTTP client for an OpenAI-style text-completion endpoint.
class RemoteLlmClient final : public LlmClient {
 public:
  explicit RemoteLlmClient(LLMClientConfig config);
  ~RemoteLlmClient() override;

  LLMResponse complete(const CompletionRequest& request) override;
  std::vector<CompletionResult> complete_batch(std::span<const CompletionRequest> requests) override;

  [[nodiscard]] const LLMClientConfig& config() const { return config_; }

 private:
  LLMResponse send(const CompletionRequest& request, std::uint64_t request_id);

  LLMClientConfig config_;
  std::string scheme_host_port_;
  std::string path_;
};

/// Deterministic stand-in for an instruction-tuned LLM, answering from
/// ground-truth tables:
///   PairRank        higher-rated candidate first
///   NextItemPick    held-out item if offered, else highest-rated candidate
///   ListwiseRank    held-out item first, then by rating (unrated last);
///                   ties keep conventional order
///   Rating tasks    ground-truth rating, else the user's mean rating
///   AttributeElicit "Key: value" lines from the attribute table
/// With noise_rate > 0, PairRank answers are flipped for a deterministic
/// pseudo-random subset of (seed, user, pair) inputs.
class MockOracle final : public LlmClient {
 public:
  explicit MockOracle(RatingScale scale, std::uint64_t noise_seed = 0, double noise_rate = 0.0);

  /// Ratings from every interaction of `full` (implicit interactions count as
  /// the scale maximum) and, when given, held-out items from split.test.
  static MockOracle from_corpus(const Corpus& full, const SplitCorpus* split = nullptr,
                                std::uint64_t noise_seed = 0, double noise_rate = 0.0);

  void set_rating(UserId u, ItemId i, double rating);
  void set_held_out(UserId u, ItemId i);
  void set_attributes(ItemId i, AttributeMap attributes);

  [[nodiscard]] std::optional<double> rating(UserId u, ItemId i) const;
  [[nodiscard]] std::optional<ItemId> held_out(UserId u) const;
  [[nodiscard]] double user_mean(UserId u) const;

  LLMResponse complete(const CompletionRequest& request) override;

 private:
  [[nodiscard]] std::string answer(const RequestMeta& meta) const;
  [[nodiscard]] double preference(UserId u, ItemId i) const;

  RatingScale scale_;
  std::uint64_t noise_seed_;
  double noise_rate_;
  std::unordered_map<std::uint64_t, double> ratings_;
  std::unordered_map<std::uint32_t, std::pair<double, std::size_t>> user_sums_;
  std::unordered_map<std::uint32_t, ItemId> held_out_;
  std::unordered_map<std::uint32_t, AttributeMap> attributes_;
};

// ---------------------------------------------------------------------------
// Response parsing.

struct TitledItem {
  ItemId item;
  std::string title;
};

/// Case-folded, whitespace-collapsed, trimmed.
std::string normalize_title(std::string_view title);

/// Splits on ';' and matches each token to a candidate title. Unmatched
/// tokens are dropped, repeated matches keep the first, and candidates the
/// response never mentions are appended in their given (conventional) order.
/// Throws Unparseable when no token matches.
std::vector<ItemId> parse_ranked_list(std::string_view response,
                                      std::span<const TitledItem> candidates);

/// First numeric token, clipped to the scale. Throws Unparseable.
double parse_rating(std::string_view response, RatingScale scale);

/// (preferred, other): whichever title the response mentions first.
std::pair<ItemId, ItemId> parse_pair_preference(std::string_view response, const TitledItem& a,
                                                const TitledItem& b);

/// "Key: value" lines restricted to `expected_keys`. Throws Unparseable when
/// no expected key is present.
AttributeMap parse_attributes(std::string_view response,
                              std::span<const std::string> expected_keys);

}  // namespace hybridrec
