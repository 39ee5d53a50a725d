#include <algorithm>
#include <limits>
#include <numeric>

#include "hybridrec/errors.hpp"
#include "hybridrec/llmlink.hpp"

namespace hybridrec {

const LLMResponse& CompletionResult::value() const {
  if (!response) {
    if (error) std::rethrow_exception(error);
    throw Error("completion result holds neither a response nor an error");
  }
  return *response;
}

std::vector<CompletionResult> LlmClient::complete_batch(
    std::span<const CompletionRequest> requests) {
  std::vector<CompletionResult> out(requests.size());
  for (std::size_t k = 0; k < requests.size(); ++k) {
    try {
      out[k].response = complete(requests[k]);
    } catch (...) {
      out[k].error = std::current_exception();
    }
  }
  return out;
}

namespace {

std::uint64_t pair_key(UserId u, ItemId i) {
  return (static_cast<std::uint64_t>(u.value) << 32) | i.value;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

MockOracle::MockOracle(RatingScale scale, std::uint64_t noise_seed, double noise_rate)
    : scale_(scale), noise_seed_(noise_seed), noise_rate_(noise_rate) {
  if (noise_rate < 0.0 || noise_rate > 1.0) throw DomainError("noise_rate must lie in [0, 1]");
}

MockOracle MockOracle::from_corpus(const Corpus& full, const SplitCorpus* split,
                                   std::uint64_t noise_seed, double noise_rate) {
  MockOracle oracle(full.rating_scale(), noise_seed, noise_rate);
  for (const auto& x : full.interactions()) {
    oracle.set_rating(x.user, x.item, x.rating.value_or(full.rating_scale().max));
  }
  if (split) {
    for (std::size_t u = 0; u < split->test.size(); ++u) {
      if (split->test[u]) oracle.set_held_out(UserId(u), split->test[u]->item);
    }
  }
  for (std::size_t i = 0; i < full.n_items(); ++i) {
    if (!full.catalog().items[i].empty()) {
      oracle.set_attributes(ItemId(i), full.catalog().items[i]);
    }
  }
  return oracle;
}

void MockOracle::set_rating(UserId u, ItemId i, double rating) {
  auto [it, inserted] = ratings_.insert_or_assign(pair_key(u, i), rating);
  auto& [sum, n] = user_sums_[u.value];
  if (inserted) {
    sum += rating;
    ++n;
  } else {
    // Rebuild this user's mean to account for the overwrite.
    sum = 0.0;
    n = 0;
    for (const auto& [key, r] : ratings_) {
      if ((key >> 32) == u.value) {
        sum += r;
        ++n;
      }
    }
  }
}

void MockOracle::set_held_out(UserId u, ItemId i) { held_out_.insert_or_assign(u.value, i); }

void MockOracle::set_attributes(ItemId i, AttributeMap attributes) {
  attributes_.insert_or_assign(i.value, std::move(attributes));
}

std::optional<double> MockOracle::rating(UserId u, ItemId i) const {
  auto it = ratings_.find(pair_key(u, i));
  if (it == ratings_.end()) return std::nullopt;
  return it->second;
}

std::optional<ItemId> MockOracle::held_out(UserId u) const {
  auto it = held_out_.find(u.value);
  if (it == held_out_.end()) return std::nullopt;
  return it->second;
}

double MockOracle::user_mean(UserId u) const {
  auto it = user_sums_.find(u.value);
  if (it == user_sums_.end() || it->second.second == 0) return 0.5 * (scale_.min + scale_.max);
  return it->second.first / static_cast<double>(it->second.second);
}

double MockOracle::preference(UserId u, ItemId i) const {
  if (auto h = held_out(u); h && *h == i) return std::numeric_limits<double>::infinity();
  return rating(u, i).value_or(-std::numeric_limits<double>::infinity());
}

LLMResponse MockOracle::complete(const CompletionRequest& request) {
  return LLMResponse{answer(request.meta), 0.0, 1};
}

std::string MockOracle::answer(const RequestMeta& meta) const {
  const auto& ids = meta.candidates;
  auto title = [&](std::size_t k) {
    return k < meta.candidate_titles.size() ? meta.candidate_titles[k]
                                            : "Item " + std::to_string(ids[k].value);
  };
  if (ids.empty()) throw ArgumentError("mock oracle request without candidates");
  if (!meta.user && meta.task != PromptTask::AttributeElicit) {
    throw ArgumentError("mock oracle request without a user");
  }

  switch (meta.task) {
    case PromptTask::ListwiseRank: {
      std::vector<std::size_t> order(ids.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return preference(*meta.user, ids[a]) > preference(*meta.user, ids[b]);
      });
      std::vector<std::string> titles;
      for (auto k : order) titles.push_back(title(k));
      return join_titles(titles);
    }
    case PromptTask::PairRank: {
      if (ids.size() != 2) throw ArgumentError("pair request needs two candidates");
      bool first = preference(*meta.user, ids[0]) >= preference(*meta.user, ids[1]);
      if (noise_rate_ > 0.0) {
        auto h = splitmix64(noise_seed_ ^ splitmix64(meta.user->value));
        h = splitmix64(h ^ pair_key(UserId(ids[0].value), ids[1]));
        const double draw = static_cast<double>(h >> 11) * 0x1.0p-53;
        if (draw < noise_rate_) first = !first;
      }
      return first ? title(0) + "; " + title(1) : title(1) + "; " + title(0);
    }
    case PromptTask::NextItemPick: {
      std::size_t best = 0;
      for (std::size_t k = 1; k < ids.size(); ++k) {
        if (preference(*meta.user, ids[k]) > preference(*meta.user, ids[best])) best = k;
      }
      return title(best);
    }
    case PromptTask::RatingPredict:
    case PromptTask::PointwiseRate: {
      const auto r = rating(*meta.user, ids[0]);
      return format_rating(r ? *r : user_mean(*meta.user));
    }
    case PromptTask::AttributeElicit: {
      std::string out;
      if (auto it = attributes_.find(ids[0].value); it != attributes_.end()) {
        for (const auto& key : meta.attribute_keys) {
          if (auto a = it->second.find(key); a != it->second.end()) {
            out += key + ": " + a->second + "\n";
          }
        }
      }
      return out.empty() ? "No information available." : out;
    }
  }
  return {};
}

}  // namespace hybridrec
