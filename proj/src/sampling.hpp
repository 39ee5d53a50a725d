#pragma once

#include <algorithm>
#include <cstddef>
#include <random>
#include <unordered_set>
#include <vector>

#include "hybridrec/types.hpp"

namespace hybridrec::detail {

using Rng = std::mt19937_64;

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Marks the items in `items` within an id space of `n_items`.
inline std::vector<char> item_mask(std::size_t n_items, const std::vector<ItemId>& items) {
  std::vector<char> mask(n_items, 0);
  for (auto i : items) mask[i.index()] = 1;
  return mask;
}

/// Up to `count` distinct unmasked items, in draw order.
inline std::vector<ItemId> sample_unmasked(const std::vector<char>& mask, std::size_t count,
                                           Rng& rng) {
  const auto free = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), char{0}));
  count = std::min(count, free);
  std::vector<ItemId> out;
  out.reserve(count);
  if (count == 0) return out;
  if (2 * count > free) {
    std::vector<ItemId> pool;
    pool.reserve(free);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) pool.emplace_back(i);
    }
    for (std::size_t k = 0; k < count; ++k) {
      std::swap(pool[k], pool[k + uniform_index(rng, pool.size() - k)]);
      out.push_back(pool[k]);
    }
    return out;
  }
  std::unordered_set<std::uint32_t> taken;
  while (out.size() < count) {
    const auto i = uniform_index(rng, mask.size());
    if (mask[i] || !taken.insert(static_cast<std::uint32_t>(i)).second) continue;
    out.emplace_back(i);
  }
  return out;
}

}  // namespace hybridrec::detail
