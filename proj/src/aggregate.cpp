#include "hybridrec/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "hybridrec/errors.hpp"

namespace hybridrec {

void AggregationPolicy::validate() const {
  if (!(alpha1 >= 0.0 && alpha1 <= 1.0)) throw DomainError(fmt::format("alpha1 {} not in [0, 1]", alpha1));
  if (!(alpha2 >= 0.0 && alpha2 < 1.0)) throw DomainError(fmt::format("alpha2 {} not in [0, 1)", alpha2));
  if (!(position_constant > 0.0)) throw DomainError("position constant C must be > 0");
}

double long_tail_coefficient(std::size_t n_interactions) {
  return std::log(static_cast<double>(n_interactions) + 1.0);
}

LongTailStats LongTailStats::from_counts(std::span<const std::size_t> counts) {
  LongTailStats s;
  s.per_user.reserve(counts.size());
  for (auto n : counts) s.per_user.push_back(long_tail_coefficient(n));
  if (!s.per_user.empty()) {
    auto [lo, hi] = std::minmax_element(s.per_user.begin(), s.per_user.end());
    s.min = *lo;
    s.max = *hi;
  }
  return s;
}

LongTailStats LongTailStats::from_corpus(const Corpus& train) {
  const auto counts = train.user_degrees();
  return from_counts(counts);
}

double adaptive_alpha(double l_u, double l_max, double l_min, const AggregationPolicy& policy) {
  policy.validate();
  if (!(l_min <= l_u && l_u <= l_max)) {
    throw DomainError(fmt::format("long-tail coefficient {} outside [{}, {}]", l_u, l_min, l_max));
  }
  if (l_max == l_min) return policy.alpha1;
  const double ratio = (l_max - l_u) / (l_max - l_min);
  return std::max(ratio, policy.alpha2) * policy.alpha1;
}

double aggregate_rating(double alpha, double u_llm, double u_rec) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError(fmt::format("alpha {} not in [0, 1]", alpha));
  if (alpha == 0.0) return u_rec;
  if (alpha == 1.0) return u_llm;
  return alpha * u_llm + (1.0 - alpha) * u_rec;
}

std::vector<double> position_utilities(std::size_t k, double position_constant) {
  std::vector<double> out(k);
  for (std::size_t s = 0; s < k; ++s) out[s] = -static_cast<double>(s + 1) * position_constant;
  return out;
}

std::unordered_map<ItemId, double> llm_position_utilities(std::span<const ItemId> llm_order,
                                                         double position_constant) {
  const auto values = position_utilities(llm_order.size(), position_constant);
  std::unordered_map<ItemId, double> out;
  for (std::size_t j = 0; j < llm_order.size(); ++j) {
    if (!out.emplace(llm_order[j], values[j]).second) {
      throw IncompletePermutation(fmt::format("item {} repeated in LLM order", llm_order[j].value));
    }
  }
  return out;
}

RankedList aggregate_rerank(const RankedList& conventional, std::span<const ItemId> llm_order,
                            double alpha, double position_constant,
                            std::vector<FusedItem>* breakdown) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError(fmt::format("alpha {} not in [0, 1]", alpha));
  if (!(position_constant > 0.0)) throw DomainError("position constant C must be > 0");
  const auto k = conventional.size();
  if (llm_order.size() != k) {
    throw IncompletePermutation(
        fmt::format("LLM order has {} items, conventional list {}", llm_order.size(), k));
  }
  const auto llm = llm_position_utilities(llm_order, position_constant);
  const auto rec = position_utilities(k, position_constant);

  std::vector<FusedItem> fused(k);
  for (std::size_t s = 0; s < k; ++s) {
    const auto item = conventional.entries[s].item;
    auto it = llm.find(item);
    if (it == llm.end()) {
      throw IncompletePermutation(fmt::format("item {} missing from LLM order", item.value));
    }
    fused[s] = {item, rec[s], it->second, aggregate_rating(alpha, it->second, rec[s])};
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fused[a].fused > fused[b].fused; });

  RankedList out;
  out.entries.reserve(k);
  for (auto s : order) out.entries.push_back({fused[s].item, fused[s].fused});
  if (breakdown) {
    breakdown->clear();
    for (auto s : order) breakdown->push_back(fused[s]);
  }
  return out;
}

}  // namespace hybridrec
