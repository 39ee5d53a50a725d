#include <algorithm>
#include <random>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "hybridrec/errors.hpp"
#include "hybridrec/evalkit.hpp"

namespace hybridrec {

namespace {

using json = nlohmann::ordered_json;

std::uint64_t config_fingerprint(EvalTask task, std::string_view backbone,
                                 const AggregationPolicy& policy, const SplitCorpus& split,
                                 const EvalOptions& o) {
  json doc;
  doc["task"] = eval_task_name(task);
  doc["backbone"] = backbone;
  doc["alpha1"] = policy.alpha1;
  doc["alpha2"] = policy.alpha2;
  doc["position_constant"] = policy.position_constant;
  doc["fixed_alpha"] = o.fixed_alpha ? json(*o.fixed_alpha) : json(nullptr);
  doc["candidates"] = o.candidates;
  doc["cutoffs"] = o.cutoffs;
  doc["similar_user"] = o.similar_user;
  doc["model_prediction"] = o.model_prediction;
  doc["similar_history"] = o.similar_history;
  doc["history_limit"] = o.history_limit;
  doc["noun"] = o.noun;
  doc["seed"] = o.seed;
  doc["n_users"] = split.train.n_users();
  doc["n_items"] = split.train.n_items();
  doc["n_train"] = split.train.size();
  doc["n_test"] = split.n_test();
  doc["context"] = o.context;
  return fnv1a64(doc.dump());
}

class AlphaSource {
 public:
  AlphaSource(const SplitCorpus& split, const AggregationPolicy& policy,
              std::optional<double> fixed)
      : stats_(LongTailStats::from_corpus(split.train)), policy_(policy), fixed_(fixed) {
    policy_.validate();
    if (fixed_ && !(*fixed_ >= 0.0 && *fixed_ <= 1.0)) throw DomainError("fixed alpha not in [0, 1]");
  }

  double operator()(UserId u) const {
    if (fixed_) return *fixed_;
    return adaptive_alpha(stats_.per_user.at(u.index()), stats_.max, stats_.min, policy_);
  }

 private:
  LongTailStats stats_;
  AggregationPolicy policy_;
  std::optional<double> fixed_;
};

/// Context shared by both evaluations: instruction, own history and the
/// optional similar-user block.
PromptContext base_context(PromptTask task, UserId u, const PromptHistory& history,
                           const MFModel* embeddings, const EvalOptions& o) {
  const bool rated = task == PromptTask::RatingPredict || task == PromptTask::PointwiseRate;
  PromptContext ctx;
  ctx.instruction = default_instruction(task, o.noun);
  ctx.history = history.entries(u, rated, o.history_limit);
  if (o.similar_user && embeddings) {
    try {
      const auto v = most_similar_user(*embeddings, u);
      auto similar = history.entries(v, rated, 0);
      if (!similar.empty()) {
        ctx = augment_with_similar_user(std::move(ctx), std::move(similar), o.similar_history);
      }
    } catch (const ArgumentError&) {
      // No usable neighbour (zero embedding or single user): leave the block out.
    }
  }
  return ctx;
}

bool is_llm_failure(const CompletionResult& result) {
  if (result.ok()) return false;
  try {
    std::rethrow_exception(result.error);
  } catch (const LlmError&) {
    return true;
  }
}

/// A run in which no request got through is an outage, not a set of
/// per-user failures: the first error is rethrown.
void require_some_response(std::span<const CompletionResult> responses) {
  if (responses.empty()) return;
  if (std::ranges::any_of(responses, [](const auto& r) { return r.ok(); })) return;
  (void)responses.front().value();
}

}  // namespace

MetricReport evaluate_topk(const TopKModels& models, LlmClient& client,
                           const AggregationPolicy& policy, const SplitCorpus& split,
                           const EvalOptions& options) {
  if (!models.recommender) throw ArgumentError("evaluate_topk needs a recommender");
  if (options.cutoffs.empty()) throw DomainError("at least one cutoff is required");
  const auto max_cutoff = *std::max_element(options.cutoffs.begin(), options.cutoffs.end());
  if (std::ranges::any_of(options.cutoffs, [](std::size_t k) { return k < 1; })) {
    throw DomainError("cutoffs must be >= 1");
  }
  if (options.candidates < max_cutoff) {
    throw DomainError(fmt::format("k' = {} is below the largest cutoff {}", options.candidates,
                                  max_cutoff));
  }
  const auto& train = split.train;
  const AlphaSource alpha_of(split, policy, options.fixed_alpha);
  const PromptHistory history(train);
  std::mt19937_64 rng(options.seed);

  struct Case {
    UserId user;
    ItemId target;
    RankedList conventional;
  };
  std::vector<Case> cases;
  std::vector<CompletionRequest> requests;
  for (std::size_t u = 0; u < split.test.size(); ++u) {
    if (!split.test[u]) continue;
    const UserId user(u);
    const auto& seen = history.items(user);
    const std::unordered_set<ItemId> exclude(seen.begin(), seen.end());
    const auto scores = models.recommender->score_items(user, seen);
    auto conventional = top_k(scores, options.candidates, exclude);
    if (conventional.size() == 0) continue;

    const auto ids = conventional.items();
    std::vector<std::string> titles;
    for (auto i : ids) titles.push_back(train.display_title(i));

    auto ctx = base_context(PromptTask::ListwiseRank, user, history, models.embeddings, options);
    if (ctx.history.empty()) continue;
    ctx.candidates = titles;
    std::shuffle(ctx.candidates.begin(), ctx.candidates.end(), rng);
    if (options.model_prediction) ctx = augment_with_model_prediction(std::move(ctx), join_titles(titles));

    requests.push_back({build_prompt(PromptTask::ListwiseRank, ctx),
                        RequestMeta{PromptTask::ListwiseRank, user, ids, titles, {}}});
    cases.push_back({user, split.test[u]->item, std::move(conventional)});
  }
  if (cases.empty()) throw EmptyInput("no test user to evaluate");

  const auto responses = client.complete_batch(requests);
  require_some_response(responses);

  const auto& cutoffs = options.cutoffs;
  std::vector<double> hr(cutoffs.size(), 0.0), ndcg(cutoffs.size(), 0.0);
  std::vector<double> base_hr(cutoffs.size(), 0.0), base_ndcg(cutoffs.size(), 0.0);
  MetricReport report;
  report.task = EvalTask::TopK;
  report.backbone = models.recommender->name();
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& kase = cases[c];
    const auto conventional_ids = kase.conventional.items();
    std::vector<ItemId> fused_ids = conventional_ids;
    std::optional<std::vector<ItemId>> llm_order;
    if (is_llm_failure(responses[c])) {
      ++report.llm_failures;
    } else {
      const auto& meta = requests[c].meta;
      std::vector<TitledItem> titled;
      for (std::size_t k = 0; k < meta.candidates.size(); ++k) {
        titled.push_back({meta.candidates[k], meta.candidate_titles[k]});
      }
      try {
        llm_order = parse_ranked_list(responses[c].value().text, titled);
      } catch (const Unparseable&) {
        ++report.llm_failures;
      }
    }
    if (llm_order) {
      fused_ids = aggregate_rerank(kase.conventional, *llm_order, alpha_of(kase.user),
                                   policy.position_constant)
                      .items();
    }
    for (std::size_t j = 0; j < cutoffs.size(); ++j) {
      hr[j] += hr_at_k(fused_ids, kase.target, cutoffs[j]);
      ndcg[j] += ndcg_at_k(fused_ids, kase.target, cutoffs[j]);
      base_hr[j] += hr_at_k(conventional_ids, kase.target, cutoffs[j]);
      base_ndcg[j] += ndcg_at_k(conventional_ids, kase.target, cutoffs[j]);
    }
  }

  const auto n = static_cast<double>(cases.size());
  for (std::size_t j = 0; j < cutoffs.size(); ++j) {
    report.metrics.emplace_back(fmt::format("HR@{}", cutoffs[j]), hr[j] / n);
    report.metrics.emplace_back(fmt::format("NDCG@{}", cutoffs[j]), ndcg[j] / n);
    report.baseline.emplace_back(fmt::format("HR@{}", cutoffs[j]), base_hr[j] / n);
    report.baseline.emplace_back(fmt::format("NDCG@{}", cutoffs[j]), base_ndcg[j] / n);
  }
  report.n_evaluated = cases.size();
  report.fingerprint = config_fingerprint(EvalTask::TopK, report.backbone, policy, split, options);
  return report;
}

MetricReport evaluate_rating(const RatingModels& models, LlmClient& client,
                             const AggregationPolicy& policy, const SplitCorpus& split,
                             const EvalOptions& options) {
  if (!models.predictor) throw ArgumentError("evaluate_rating needs a rating predictor");
  const auto& train = split.train;
  const auto scale = train.rating_scale();
  const AlphaSource alpha_of(split, policy, options.fixed_alpha);
  const PromptHistory history(train);

  struct Case {
    UserId user;
    double actual;
    double conventional;
  };
  std::vector<Case> cases;
  std::vector<CompletionRequest> requests;
  for (std::size_t u = 0; u < split.test.size(); ++u) {
    const auto& held = split.test[u];
    if (!held || !held->rating) continue;
    const UserId user(u);
    auto ctx = base_context(PromptTask::RatingPredict, user, history, models.embeddings, options);
    if (ctx.history.empty()) continue;
    const double conventional = models.predictor->predict(user, held->item);
    const auto title = train.display_title(held->item);
    ctx.candidates = {title};
    if (options.model_prediction) {
      ctx = augment_with_model_prediction(std::move(ctx), fmt::format("{:.1f}", conventional));
    }
    requests.push_back({build_prompt(PromptTask::RatingPredict, ctx),
                        RequestMeta{PromptTask::RatingPredict, user, {held->item}, {title}, {}}});
    cases.push_back({user, *held->rating, conventional});
  }
  if (cases.empty()) throw EmptyInput("no rated test interaction to evaluate");

  const auto responses = client.complete_batch(requests);
  require_some_response(responses);

  MetricReport report;
  report.task = EvalTask::Rating;
  report.backbone = "rating_mf";
  std::vector<RatingPair> fused, base;
  fused.reserve(cases.size());
  base.reserve(cases.size());
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& kase = cases[c];
    double prediction = kase.conventional;
    if (is_llm_failure(responses[c])) {
      ++report.llm_failures;
    } else {
      try {
        const double llm = parse_rating(responses[c].value().text, scale);
        prediction = aggregate_rating(alpha_of(kase.user), llm, kase.conventional);
      } catch (const Unparseable&) {
        ++report.llm_failures;
      }
    }
    fused.push_back({prediction, kase.actual});
    base.push_back({kase.conventional, kase.actual});
  }
  report.metrics = {{"RMSE", rmse(fused)}, {"MAE", mae(fused)}};
  report.baseline = {{"RMSE", rmse(base)}, {"MAE", mae(base)}};
  report.n_evaluated = cases.size();
  report.fingerprint = config_fingerprint(EvalTask::Rating, report.backbone, policy, split, options);
  return report;
}

}  // namespace hybridrec
