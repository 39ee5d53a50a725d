#pragma once

#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

#include "hybridrec/corpus.hpp"
#include "hybridrec/recmodels.hpp"
#include "hybridrec/types.hpp"

namespace hybridrec {

/// Weights for fusing LLM and conventional utilities.
///
/// alpha_u = max((l_max - l_u) / (l_max - l_min), cutoff) * weight
///
/// where l_u = ln(N(u) + 1). Tail users (small N(u)) get the full `weight`;
/// head users are floored at `cutoff * weight`.
struct AggregationPolicy {
  double alpha1 = 0.5;  // weight
  double alpha2 = 0.3;  // cutoff, < 1
  double position_constant = 1.0;

  /// alpha1 in [0, 1], alpha2 in [0, 1), position_constant > 0.
  void validate() const;
};

/// ln(n + 1).
double long_tail_coefficient(std::size_t n_interactions);

struct LongTailStats {
  std::vector<double> per_user;
  double max = 0.0;
  double min = 0.0;

  /// Coefficients from each user's interaction count in `train`.
  static LongTailStats from_corpus(const Corpus& train);
  static LongTailStats from_counts(std::span<const std::size_t> counts);
};

/// Throws DomainError if l_u lies outside [l_min, l_max]. A degenerate
/// population (l_max == l_min) yields alpha1.
double adaptive_alpha(double l_u, double l_max, double l_min, const AggregationPolicy& policy);

/// alpha * u_llm + (1 - alpha) * u_rec.
double aggregate_rating(double alpha, double u_llm, double u_rec);

/// [-1*C, -2*C, ..., -k*C].
std::vector<double> position_utilities(std::size_t k, double position_constant);

/// Item at LLM position j (1-based) gets -j*C.
std::unordered_map<ItemId, double> llm_position_utilities(std::span<const ItemId> llm_order,
                                                         double position_constant);

struct FusedItem {
  ItemId item;
  double rec_utility = 0.0;
  double llm_utility = 0.0;
  double fused = 0.0;
};

/// Fuses the conventional list with the LLM's ordering of the same items and
/// returns them sorted by fused utility (ties: earlier conventional position).
/// The RankedList scores are the fused utilities.
RankedList aggregate_rerank(const RankedList& conventional, std::span<const ItemId> llm_order,
                            double alpha, double position_constant,
                            std::vector<FusedItem>* breakdown = nullptr);

}  // namespace hybridrec
