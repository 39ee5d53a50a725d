#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hybridrec/aggregate.hpp"
#include "hybridrec/augment.hpp"
#include "hybridrec/corpus.hpp"
#include "hybridrec/llmlink.hpp"
#include "hybridrec/recmodels.hpp"

namespace hybridrec {

// Single held-out target per user.
double hr_at_k(std::span<const ItemId> ranked, ItemId target, std::size_t k);
double hr_at_k(const RankedList& ranked, ItemId target, std::size_t k);
/// 1 / log2(r + 1) for a hit at rank r <= k, else 0.
double ndcg_at_k(std::span<const ItemId> ranked, ItemId target, std::size_t k);
double ndcg_at_k(const RankedList& ranked, ItemId target, std::size_t k);

struct RatingPair {
  double predicted = 0.0;
  double actual = 0.0;
};

double rmse(std::span<const RatingPair> pairs);
double mae(std::span<const RatingPair> pairs);

enum class EvalTask { TopK, Rating };
std::string_view eval_task_name(EvalTask task);

using NamedMetrics = std::vector<std::pair<std::string, double>>;

struct MetricReport {
  EvalTask task = EvalTask::TopK;
  std::string backbone;
  /// "HR@3", "NDCG@3", ... or "RMSE", "MAE". Fused pipeline and the
  /// conventional model alone, evaluated on the same users.
  NamedMetrics metrics;
  NamedMetrics baseline;
  std::size_t n_evaluated = 0;
  /// Users or pairs whose LLM answer failed and fell back to the
  /// conventional result.
  std::size_t llm_failures = 0;
  std::uint64_t fingerprint = 0;

  /// Throws ArgumentError for an unknown name.
  [[nodiscard]] double metric(std::string_view name) const;
  [[nodiscard]] double baseline_metric(std::string_view name) const;
  /// Fixed key order; identical reports serialise to identical bytes.
  [[nodiscard]] std::string to_json() const;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fingerprint_hex(std::uint64_t fingerprint);

struct EvalOptions {
  /// Size k' of the conventional list handed to the LLM.
  std::size_t candidates = 10;
  std::vector<std::size_t> cutoffs = {3, 5};
  /// Overrides the per-user adaptive weight when set.
  std::optional<double> fixed_alpha;
  bool similar_user = true;
  bool model_prediction = true;
  std::size_t similar_history = kDefaultSimilarHistory;
  std::size_t history_limit = kDefaultHistoryLimit;
  std::string noun = "movie";
  /// Seeds the presentation order of candidates in listwise prompts.
  std::uint64_t seed = 0;
  /// Extra text folded into the fingerprint, e.g. the caller's run config.
  std::string context;
};

/// Backbones used by an evaluation. `embeddings` (optional) selects the most
/// similar user for prompt augmentation.
struct TopKModels {
  const Recommender* recommender = nullptr;
  const MFModel* embeddings = nullptr;
};

struct RatingModels {
  const RatingPredictor* predictor = nullptr;
  const MFModel* embeddings = nullptr;
};

/// Conventional top-k' excluding train items, listwise LLM rerank, adaptive
/// fusion, HR/NDCG at each cutoff over users with a test item. Users whose
/// LLM answer fails keep the conventional list; if every request fails the
/// first transport error is thrown.
MetricReport evaluate_topk(const TopKModels& models, LlmClient& client,
                           const AggregationPolicy& policy, const SplitCorpus& split,
                           const EvalOptions& options = {});

/// Conventional rating, LLM rating, adaptive fusion, RMSE/MAE over the rated
/// test interactions.
MetricReport evaluate_rating(const RatingModels& models, LlmClient& client,
                             const AggregationPolicy& policy, const SplitCorpus& split,
                             const EvalOptions& options = {});

}  // namespace hybridrec
