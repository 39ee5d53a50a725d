#include "hybridrec/augment.hpp"

#include <algorithm>
#include <unordered_set>

#include <fmt/format.h>

#include "hybridrec/errors.hpp"
#include "sampling.hpp"

namespace hybridrec {

using detail::Rng;

PromptHistory::PromptHistory(const Corpus& corpus)
    : corpus_(&corpus), sequences_(corpus.user_sequences()), items_(corpus.n_users()) {
  const auto& xs = corpus.interactions();
  for (std::size_t u = 0; u < sequences_.size(); ++u) {
    items_[u].reserve(sequences_[u].size());
    for (auto k : sequences_[u]) items_[u].push_back(xs[k].item);
  }
}

std::vector<HistoryEntry> PromptHistory::entries(UserId u, bool with_ratings,
                                                 std::size_t limit) const {
  const auto& seq = sequences_.at(u.index());
  const std::size_t first = (limit > 0 && seq.size() > limit) ? seq.size() - limit : 0;
  std::vector<HistoryEntry> out;
  out.reserve(seq.size() - first);
  for (std::size_t k = first; k < seq.size(); ++k) {
    const auto& x = corpus_->interactions()[seq[k]];
    out.push_back({corpus_->display_title(x.item), with_ratings ? x.rating : std::nullopt});
  }
  return out;
}

std::string_view item_noun(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::MovieLens100K:
    case DatasetFormat::MovieLens1M: return "movie";
    case DatasetFormat::BookCrossing: return "book";
    case DatasetFormat::GenericCSV: break;
  }
  return "item";
}

namespace {

std::vector<std::pair<ItemId, ItemId>> sample_pairs(const std::vector<char>& mask,
                                                    std::size_t count, Rng& rng) {
  std::vector<ItemId> pool;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) pool.emplace_back(i);
  }
  const std::size_t m = pool.size();
  const std::size_t max_pairs = m < 2 ? 0 : m * (m - 1) / 2;
  count = std::min(count, max_pairs);
  std::vector<std::pair<ItemId, ItemId>> out;
  out.reserve(count);
  if (count == 0) return out;
  if (2 * count > max_pairs) {
    std::vector<std::pair<ItemId, ItemId>> all;
    all.reserve(max_pairs);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) all.emplace_back(pool[a], pool[b]);
    }
    for (std::size_t k = 0; k < count; ++k) {
      std::swap(all[k], all[k + detail::uniform_index(rng, all.size() - k)]);
      out.push_back(all[k]);
    }
    return out;
  }
  std::unordered_set<std::uint64_t> taken;
  while (out.size() < count) {
    const auto a = pool[detail::uniform_index(rng, m)];
    const auto b = pool[detail::uniform_index(rng, m)];
    if (a == b) continue;
    const auto lo = std::min(a.value, b.value);
    const auto hi = std::max(a.value, b.value);
    if (!taken.insert((static_cast<std::uint64_t>(lo) << 32) | hi).second) continue;
    out.emplace_back(a, b);
  }
  return out;
}

}  // namespace

DirectAugmentation augment_direct(const Corpus& train, LlmClient& client,
                                  std::size_t pairs_per_user, std::uint64_t seed,
                                  const AugmentOptions& options) {
  DirectAugmentation result;
  if (pairs_per_user == 0) return result;

  const PromptHistory history(train);
  const auto instruction = default_instruction(PromptTask::PairRank, options.noun);
  Rng rng(seed);
  std::vector<CompletionRequest> requests;
  for (std::size_t u = 0; u < train.n_users(); ++u) {
    const UserId user(u);
    if (history.items(user).empty()) continue;
    const auto mask = detail::item_mask(train.n_items(), history.items(user));
    auto ctx = PromptContext{instruction, history.entries(user, false, options.history_limit), {},
                             std::nullopt, std::nullopt};
    for (auto [a, b] : sample_pairs(mask, pairs_per_user, rng)) {
      ctx.candidates = {train.display_title(a), train.display_title(b)};
      RequestMeta meta{PromptTask::PairRank, user, {a, b}, ctx.candidates, {}};
      requests.push_back({build_prompt(PromptTask::PairRank, ctx), std::move(meta)});
    }
  }

  const auto responses = client.complete_batch(requests);
  result.report.requested = requests.size();
  for (std::size_t k = 0; k < requests.size(); ++k) {
    const auto& meta = requests[k].meta;
    const auto& text = responses[k].value().text;
    try {
      const auto [pos, neg] =
          parse_pair_preference(text, {meta.candidates[0], meta.candidate_titles[0]},
                                {meta.candidates[1], meta.candidate_titles[1]});
      result.triples.push_back({*meta.user, pos, neg, TripleOrigin::LlmAugmented});
    } catch (const Unparseable&) {
      ++result.report.skipped;
    }
  }
  result.report.emitted = result.triples.size();
  return result;
}

std::vector<ItemId> insert_at(std::vector<ItemId> sequence, ItemId item, std::size_t pos) {
  if (pos > sequence.size()) {
    throw DomainError(fmt::format("insert position {} beyond length {}", pos, sequence.size()));
  }
  sequence.insert(sequence.begin() + static_cast<long>(pos), item);
  return sequence;
}

SequentialAugmentation augment_sequential(const Corpus& train, LlmClient& client,
                                          std::size_t candidates_per_user, std::uint64_t seed,
                                          const AugmentOptions& options) {
  if (candidates_per_user < 1) throw DomainError("candidates_per_user must be >= 1");
  const PromptHistory history(train);
  const auto instruction = default_instruction(PromptTask::NextItemPick, options.noun);
  Rng rng(seed);

  SequentialAugmentation result;
  std::vector<CompletionRequest> requests;
  std::vector<std::size_t> positions;
  std::vector<std::optional<std::size_t>> request_of;  // per sequence
  for (std::size_t u = 0; u < train.n_users(); ++u) {
    const UserId user(u);
    const auto& items = history.items(user);
    if (items.empty()) continue;
    const auto mask = detail::item_mask(train.n_items(), items);
    const auto offered = detail::sample_unmasked(mask, candidates_per_user, rng);
    const auto pos = detail::uniform_index(rng, items.size() + 1);
    result.sequences.push_back({user, items, std::nullopt});
    if (offered.empty()) {
      request_of.emplace_back();
      continue;
    }
    PromptContext ctx{instruction, history.entries(user, false, options.history_limit), {},
                      std::nullopt, std::nullopt};
    for (auto i : offered) ctx.candidates.push_back(train.display_title(i));
    RequestMeta meta{PromptTask::NextItemPick, user, offered, ctx.candidates, {}};
    request_of.push_back(requests.size());
    positions.push_back(pos);
    requests.push_back({build_prompt(PromptTask::NextItemPick, ctx), std::move(meta)});
  }

  const auto responses = client.complete_batch(requests);
  result.report.requested = requests.size();
  for (std::size_t s = 0; s < result.sequences.size(); ++s) {
    if (!request_of[s]) continue;
    const auto k = *request_of[s];
    const auto& meta = requests[k].meta;
    std::vector<TitledItem> titled;
    for (std::size_t c = 0; c < meta.candidates.size(); ++c) {
      titled.push_back({meta.candidates[c], meta.candidate_titles[c]});
    }
    try {
      const auto pick = parse_ranked_list(responses[k].value().text, titled).front();
      auto& seq = result.sequences[s];
      seq.items = insert_at(std::move(seq.items), pick, positions[k]);
      seq.inserted_at = positions[k];
      ++result.report.emitted;
    } catch (const Unparseable&) {
      ++result.report.skipped;
    }
  }
  return result;
}

Corpus apply_sequences(const Corpus& train, std::span<const AugmentedSequence> sequences) {
  const auto seqs = train.user_sequences();
  const auto& xs = train.interactions();
  std::vector<const AugmentedSequence*> by_user(train.n_users(), nullptr);
  for (const auto& s : sequences) by_user.at(s.user.index()) = &s;

  std::vector<Interaction> out;
  out.reserve(xs.size() + sequences.size());
  for (std::size_t u = 0; u < train.n_users(); ++u) {
    const auto* aug = by_user[u];
    const auto& seq = seqs[u];
    if (!aug || !aug->inserted_at) {
      for (auto k : seq) out.push_back(xs[k]);
      continue;
    }
    const auto pos = *aug->inserted_at;
    if (aug->items.size() != seq.size() + 1 || pos > seq.size()) {
      throw ArgumentError(fmt::format("augmented sequence for user {} does not extend the corpus",
                                      u));
    }
    for (std::size_t k = 0; k <= seq.size(); ++k) {
      if (k == pos) {
        const auto& anchor = xs[seq[pos > 0 ? pos - 1 : 0]];
        out.push_back({UserId(u), aug->items[pos], std::nullopt, anchor.timestamp});
      }
      if (k < seq.size()) out.push_back(xs[seq[k]]);
    }
  }
  return train.with_interactions(std::move(out));
}

std::vector<std::string> default_attribute_targets(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::MovieLens100K:
    case DatasetFormat::MovieLens1M: return {"Movie Director", "Movie Star"};
    case DatasetFormat::BookCrossing: return {"Book Genres", "Page Length"};
    case DatasetFormat::GenericCSV: break;
  }
  return {};
}

AttributeAugmentation augment_attributes(const Catalog& catalog,
                                         std::span<const std::string> item_keys,
                                         LlmClient& client,
                                         std::span<const std::string> targets,
                                         const AugmentOptions& options) {
  if (targets.empty()) throw ArgumentError("augment_attributes needs at least one target");
  if (item_keys.size() != catalog.items.size()) {
    throw ArgumentError("item keys do not match the catalog");
  }
  const std::vector<std::string> keys(targets.begin(), targets.end());
  const auto instruction = default_instruction(PromptTask::AttributeElicit, options.noun, keys);

  std::vector<CompletionRequest> requests;
  requests.reserve(catalog.items.size());
  for (std::size_t i = 0; i < catalog.items.size(); ++i) {
    PromptContext ctx{instruction, {}, {item_display_title(catalog.items[i], item_keys[i])},
                      std::nullopt, std::nullopt};
    RequestMeta meta{PromptTask::AttributeElicit, std::nullopt, {ItemId(i)}, ctx.candidates, keys};
    requests.push_back({build_prompt(PromptTask::AttributeElicit, ctx), std::move(meta)});
  }

  const auto responses = client.complete_batch(requests);
  AttributeAugmentation result{catalog, {requests.size(), 0, 0}};
  for (std::size_t i = 0; i < requests.size(); ++i) {
    try {
      auto parsed = parse_attributes(responses[i].value().text, keys);
      result.catalog.items[i].merge(parsed);  // keeps existing keys
      ++result.report.emitted;
    } catch (const Unparseable&) {
      ++result.report.skipped;
    }
  }
  return result;
}

}  // namespace hybridrec
