#include "hybridrec/errors.hpp"
#include "hybridrec/recmodels.hpp"

namespace hybridrec {

MarkovSequentialModel::MarkovSequentialModel(std::size_t n_items) : popularity_(n_items, 0) {}

std::uint64_t MarkovSequentialModel::count(ItemId from, ItemId to) const {
  auto it = transitions_.find({from.value, to.value});
  return it == transitions_.end() ? 0 : it->second;
}

std::uint64_t MarkovSequentialModel::total_transitions() const {
  std::uint64_t total = 0;
  for (const auto& [pair, n] : transitions_) total += n;
  return total;
}

void MarkovSequentialModel::observe(std::span<const ItemId> sequence) {
  for (std::size_t k = 0; k < sequence.size(); ++k) {
    if (sequence[k].index() >= popularity_.size()) throw IdOutOfRange("item in sequence");
    ++popularity_[sequence[k].index()];
    if (k > 0) ++transitions_[{sequence[k - 1].value, sequence[k].value}];
  }
}

void MarkovSequentialModel::add_transition(ItemId from, ItemId to, std::uint64_t n) {
  if (from.index() >= popularity_.size() || to.index() >= popularity_.size()) {
    throw IdOutOfRange("transition endpoint");
  }
  if (n > 0) transitions_[{from.value, to.value}] += n;
}

MarkovSequentialModel train_markov_seq(const Corpus& train, const TrainConfig&) {
  const auto seqs = train.item_sequences();
  return train_markov_seq(seqs, train.n_items());
}

MarkovSequentialModel train_markov_seq(std::span<const std::vector<ItemId>> sequences,
                                       std::size_t n_items) {
  MarkovSequentialModel model(n_items);
  for (const auto& seq : sequences) model.observe(seq);
  return model;
}

std::vector<double> next_item_scores(const MarkovSequentialModel& model,
                                     std::span<const ItemId> history) {
  std::vector<double> scores(model.n_items());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = MarkovSequentialModel::kPopularityBackoff *
                static_cast<double>(model.popularity(ItemId(i)));
  }
  if (history.empty()) return scores;
  const auto last = history.back().value;
  const auto& t = model.transitions();
  for (auto it = t.lower_bound({last, 0}); it != t.end() && it->first.first == last; ++it) {
    scores[it->first.second] += static_cast<double>(it->second);
  }
  return scores;
}

}  // namespace hybridrec
