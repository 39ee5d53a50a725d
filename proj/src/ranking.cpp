#include <algorithm>
#include <cmath>
#include <optional>

#include "hybridrec/errors.hpp"
#include "hybridrec/recmodels.hpp"

namespace hybridrec {

std::vector<ItemId> RankedList::items() const {
  std::vector<ItemId> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.item);
  return out;
}

RankedList top_k(std::span<const double> scores, std::size_t k,
                 const std::unordered_set<ItemId>& exclude) {
  if (k == 0) throw DomainError("top_k requires k >= 1");
  std::vector<ScoredItem> pool;
  pool.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!exclude.contains(ItemId(i))) pool.push_back({ItemId(i), scores[i]});
  }
  auto better = [](const ScoredItem& a, const ScoredItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item < b.item;
  };
  const auto n = std::min(k, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<long>(n), pool.end(), better);
  pool.resize(n);
  return RankedList{std::move(pool)};
}

RankedList top_k(const MFModel& model, UserId u, std::size_t k,
                 const std::unordered_set<ItemId>& exclude) {
  const auto scores = model.scores(u);
  return top_k(scores, k, exclude);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("cosine similarity of unequal dimensions");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) throw ZeroVector();
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

UserId most_similar_user(const MFModel& model, UserId u) {
  const auto eu = model.user_embedding(u);
  if (std::all_of(eu.begin(), eu.end(), [](double v) { return v == 0.0; })) throw ZeroVector();
  std::optional<UserId> best;
  double best_sim = 0.0;
  for (std::size_t v = 0; v < model.n_users(); ++v) {
    if (v == u.index()) continue;
    const auto ev = model.user_embedding(UserId(v));
    if (std::all_of(ev.begin(), ev.end(), [](double x) { return x == 0.0; })) continue;
    const double sim = cosine_similarity(eu, ev);
    if (!best || sim > best_sim) {
      best = UserId(v);
      best_sim = sim;
    }
  }
  if (!best) throw NoCandidate("no other user with a non-zero embedding");
  return *best;
}

}  // namespace hybridrec
