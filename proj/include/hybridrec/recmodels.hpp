#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hybridrec/corpus.hpp"
#include "hybridrec/types.hpp"

namespace hybridrec {

struct TrainConfig {
  std::size_t dimension = 32;
  double learning_rate = 0.05;
  double l2_regularization = 0.01;
  std::size_t epochs = 20;
  std::size_t negatives_per_positive = 1;
  std::uint64_t rng_seed = 42;
  /// Standard deviation of the Gaussian used to initialise embeddings.
  double init_std = 0.01;

  void validate() const;
};

using Embedding = std::vector<double>;

/// Dot-product factorisation model: score(u, i) = e_u . e_i.
class MFModel {
 public:
  MFModel() = default;
  MFModel(std::size_t n_users, std::size_t n_items, std::size_t dimension);

  [[nodiscard]] std::size_t n_users() const { return n_users_; }
  [[nodiscard]] std::size_t n_items() const { return n_items_; }
  [[nodiscard]] std::size_t dimension() const { return dim_; }

  [[nodiscard]] std::span<const double> user_embedding(UserId u) const;
  [[nodiscard]] std::span<const double> item_embedding(ItemId i) const;
  [[nodiscard]] std::span<double> user_embedding(UserId u);
  [[nodiscard]] std::span<double> item_embedding(ItemId i);

  [[nodiscard]] double score(UserId u, ItemId i) const;
  /// Scores of every item for one user, indexed by ItemId.
  [[nodiscard]] std::vector<double> scores(UserId u) const;

  [[nodiscard]] const std::vector<double>& user_parameters() const { return users_; }
  [[nodiscard]] const std::vector<double>& item_parameters() const { return items_; }
  std::vector<double>& user_parameters() { return users_; }
  std::vector<double>& item_parameters() { return items_; }

  [[nodiscard]] bool all_finite() const;

  bool operator==(const MFModel&) const = default;

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> users_;  // row-major n_users x dim
  std::vector<double> items_;  // row-major n_items x dim
};

enum class TripleOrigin { Observed, LlmAugmented };

struct BprTriple {
  UserId user;
  ItemId positive;
  ItemId negative;
  TripleOrigin origin = TripleOrigin::Observed;

  bool operator==(const BprTriple&) const = default;
};

/// SGD on -ln sigma(y_ui - y_uj) + L2 over uniformly sampled negatives.
/// `extra` triples (for instance LLM-augmented ones) are visited once per
/// epoch alongside the sampled observed triples.
MFModel train_mf_bpr(const Corpus& train, const TrainConfig& config,
                     std::span<const BprTriple> extra = {});

/// Sum over triples of -ln sigma(y_ui - y_uj).
double bpr_loss(const MFModel& model, std::span<const BprTriple> triples);

/// Deterministic observed triples: each positive paired with
/// `negatives_per_positive` uniformly drawn un-interacted items.
std::vector<BprTriple> sample_bpr_triples(const Corpus& train, std::size_t negatives_per_positive,
                                          std::uint64_t seed);

struct ScoredItem {
  ItemId item;
  double score = 0.0;

  bool operator==(const ScoredItem&) const = default;
};

/// Descending by score; equal scores keep the lower ItemId first.
struct RankedList {
  std::vector<ScoredItem> entries;

  [[nodiscard]] std::size_t size() const { return entries.size(); }
  [[nodiscard]] std::vector<ItemId> items() const;
  bool operator==(const RankedList&) const = default;
};

/// k highest-scoring items of `scores` (indexed by ItemId) not in `exclude`.
/// Returns every available item when fewer than k remain.
RankedList top_k(std::span<const double> scores, std::size_t k,
                 const std::unordered_set<ItemId>& exclude = {});
RankedList top_k(const MFModel& model, UserId u, std::size_t k,
                 const std::unordered_set<ItemId>& exclude = {});

/// mu + b_u + b_i + e_u . e_i, clipped to the rating scale.
class RatingModel {
 public:
  RatingModel() = default;
  RatingModel(std::size_t n_users, std::size_t n_items, std::size_t dimension, RatingScale scale);

  double global_mean = 0.0;
  std::vector<double> user_bias;
  std::vector<double> item_bias;
  MFModel factors;
  RatingScale scale;
  /// Whether the entity had at least one rated training interaction.
  std::vector<bool> user_seen;
  std::vector<bool> item_seen;

  [[nodiscard]] std::size_t n_users() const { return user_bias.size(); }
  [[nodiscard]] std::size_t n_items() const { return item_bias.size(); }
  /// Unclipped model output for a known user and item.
  [[nodiscard]] double raw(UserId u, ItemId i) const;

  bool operator==(const RatingModel&) const = default;
};

RatingModel train_rating_mf(const Corpus& train, const TrainConfig& config);

/// Clipped prediction. Users without training ratings fall back to mu + b_i
/// (and unseen items to mu + b_u).
double predict_rating(const RatingModel& model, UserId u, ItemId i);

/// First-order transition counts with a popularity back-off.
class MarkovSequentialModel {
 public:
  static constexpr double kPopularityBackoff = 1e-6;

  MarkovSequentialModel() = default;
  explicit MarkovSequentialModel(std::size_t n_items);

  [[nodiscard]] std::size_t n_items() const { return popularity_.size(); }
  [[nodiscard]] std::uint64_t count(ItemId from, ItemId to) const;
  [[nodiscard]] std::uint64_t popularity(ItemId i) const { return popularity_.at(i.index()); }
  [[nodiscard]] std::uint64_t total_transitions() const;
  [[nodiscard]] const std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t>&
  transitions() const {
    return transitions_;
  }

  void observe(std::span<const ItemId> sequence);
  void add_transition(ItemId from, ItemId to, std::uint64_t n);
  void set_popularity(ItemId i, std::uint64_t n) { popularity_.at(i.index()) = n; }

  bool operator==(const MarkovSequentialModel&) const = default;

 private:
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> transitions_;
  std::vector<std::uint64_t> popularity_;
};

MarkovSequentialModel train_markov_seq(const Corpus& train, const TrainConfig& config = {});
MarkovSequentialModel train_markov_seq(std::span<const std::vector<ItemId>> sequences,
                                       std::size_t n_items);

/// score(i) = count(last, i) + 1e-6 * popularity(i); indexed by ItemId.
std::vector<double> next_item_scores(const MarkovSequentialModel& model,
                                     std::span<const ItemId> history);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// argmax over v != u of cosine(e_u, e_v); ties go to the lower UserId.
/// Users with zero embeddings are not candidates.
UserId most_similar_user(const MFModel& model, UserId u);

// ---------------------------------------------------------------------------
// Pluggable scoring interfaces.

/// Any top-k backbone: produces one score per item for a user.
class Recommender {
 public:
  virtual ~Recommender() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  /// `history` is the user's training sequence in timestamp order.
  [[nodiscard]] virtual std::vector<double> score_items(UserId u,
                                                        std::span<const ItemId> history) const = 0;
};

/// Any rating backbone.
class RatingPredictor {
 public:
  virtual ~RatingPredictor() = default;
  [[nodiscard]] virtual double predict(UserId u, ItemId i) const = 0;
};

class MFRecommender final : public Recommender {
 public:
  explicit MFRecommender(const MFModel& model) : model_(model) {}
  [[nodiscard]] std::string name() const override { return "mf_bpr"; }
  [[nodiscard]] std::vector<double> score_items(UserId u,
                                                std::span<const ItemId>) const override {
    return model_.scores(u);
  }

 private:
  const MFModel& model_;
};

class MarkovRecommender final : public Recommender {
 public:
  explicit MarkovRecommender(const MarkovSequentialModel& model) : model_(model) {}
  [[nodiscard]] std::string name() const override { return "markov"; }
  [[nodiscard]] std::vector<double> score_items(UserId,
                                                std::span<const ItemId> history) const override {
    return next_item_scores(model_, history);
  }

 private:
  const MarkovSequentialModel& model_;
};

class RatingModelPredictor final : public RatingPredictor {
 public:
  explicit RatingModelPredictor(const RatingModel& model) : model_(model) {}
  [[nodiscard]] double predict(UserId u, ItemId i) const override {
    return predict_rating(model_, u, i);
  }

 private:
  const RatingModel& model_;
};

// ---------------------------------------------------------------------------
// Serialisation. Versioned little-endian binary; round trips are bit-exact.

enum class ModelKind : std::uint8_t { MfBpr = 1, RatingMf = 2, Markov = 3 };

/// Original dataset keys for the dense ids a model was trained on.
struct IdMaps {
  std::vector<std::string> users;
  std::vector<std::string> items;

  static IdMaps from(const Corpus& corpus) { return {corpus.user_keys(), corpus.item_keys()}; }
  bool operator==(const IdMaps&) const = default;
};

void save_model(const MFModel& model, const IdMaps& ids, const std::filesystem::path& path);
void save_model(const RatingModel& model, const IdMaps& ids, const std::filesystem::path& path);
void save_model(const MarkovSequentialModel& model, const IdMaps& ids,
                const std::filesystem::path& path);

ModelKind peek_model_kind(const std::filesystem::path& path);
MFModel load_mf_model(const std::filesystem::path& path, IdMaps* ids = nullptr);
RatingModel load_rating_model(const std::filesystem::path& path, IdMaps* ids = nullptr);
MarkovSequentialModel load_markov_model(const std::filesystem::path& path, IdMaps* ids = nullptr);

}  // namespace hybridrec
