#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>

#include <fmt/format.h>

#include "hybridrec/errors.hpp"
#include "hybridrec/recmodels.hpp"

namespace hybridrec {

void TrainConfig::validate() const {
  if (dimension == 0) throw DomainError("dimension must be >= 1");
  if (!(learning_rate > 0.0)) throw DomainError("learning_rate must be > 0");
  if (!(l2_regularization >= 0.0)) throw DomainError("l2_regularization must be >= 0");
  if (negatives_per_positive == 0) throw DomainError("negatives_per_positive must be >= 1");
  if (!(init_std >= 0.0)) throw DomainError("init_std must be >= 0");
}

MFModel::MFModel(std::size_t n_users, std::size_t n_items, std::size_t dimension)
    : n_users_(n_users),
      n_items_(n_items),
      dim_(dimension),
      users_(n_users * dimension, 0.0),
      items_(n_items * dimension, 0.0) {}

std::span<const double> MFModel::user_embedding(UserId u) const {
  if (u.index() >= n_users_) throw IdOutOfRange(fmt::format("user {}", u.value));
  return {users_.data() + u.index() * dim_, dim_};
}

std::span<const double> MFModel::item_embedding(ItemId i) const {
  if (i.index() >= n_items_) throw IdOutOfRange(fmt::format("item {}", i.value));
  return {items_.data() + i.index() * dim_, dim_};
}

std::span<double> MFModel::user_embedding(UserId u) {
  if (u.index() >= n_users_) throw IdOutOfRange(fmt::format("user {}", u.value));
  return {users_.data() + u.index() * dim_, dim_};
}

std::span<double> MFModel::item_embedding(ItemId i) {
  if (i.index() >= n_items_) throw IdOutOfRange(fmt::format("item {}", i.value));
  return {items_.data() + i.index() * dim_, dim_};
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// ln(1 + e^x) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Sorted item lists per user, for rejection sampling of negatives.
std::vector<std::vector<std::uint32_t>> interacted_items(const Corpus& corpus) {
  std::vector<std::vector<std::uint32_t>> seen(corpus.n_users());
  for (const auto& x : corpus.interactions()) seen[x.user.index()].push_back(x.item.value);
  for (auto& s : seen) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
  }
  return seen;
}

class NegativeSampler {
 public:
  NegativeSampler(const Corpus& corpus, std::mt19937_64& rng)
      : seen_(interacted_items(corpus)),
        rng_(rng),
        dist_(0, corpus.n_items() == 0 ? 0 : static_cast<std::uint32_t>(corpus.n_items() - 1)),
        n_items_(corpus.n_items()) {}

  // Uniform over items the user has not interacted with; nullopt if none.
  std::optional<ItemId> draw(UserId u) {
    const auto& s = seen_[u.index()];
    if (s.size() >= n_items_) return std::nullopt;
    while (true) {
      const auto j = dist_(rng_);
      if (!std::binary_search(s.begin(), s.end(), j)) return ItemId(j);
    }
  }

 private:
  std::vector<std::vector<std::uint32_t>> seen_;
  std::mt19937_64& rng_;
  std::uniform_int_distribution<std::uint32_t> dist_;
  std::size_t n_items_;
};

void bpr_step(MFModel& model, const BprTriple& t, double lr, double reg,
              std::vector<double>& scratch) {
  auto eu = model.user_embedding(t.user);
  auto ei = model.item_embedding(t.positive);
  auto ej = model.item_embedding(t.negative);
  const double x = dot(eu, ei) - dot(eu, ej);
  const double g = sigmoid(-x);  // d(-ln sigma(x))/dx = -sigma(-x)
  scratch.assign(eu.begin(), eu.end());
  for (std::size_t k = 0; k < eu.size(); ++k) {
    eu[k] += lr * (g * (ei[k] - ej[k]) - reg * eu[k]);
    ei[k] += lr * (g * scratch[k] - reg * ei[k]);
    ej[k] += lr * (-g * scratch[k] - reg * ej[k]);
  }
}

}  // namespace

double MFModel::score(UserId u, ItemId i) const { return dot(user_embedding(u), item_embedding(i)); }

std::vector<double> MFModel::scores(UserId u) const {
  const auto eu = user_embedding(u);
  std::vector<double> out(n_items_);
  for (std::size_t i = 0; i < n_items_; ++i) {
    out[i] = dot(eu, {items_.data() + i * dim_, dim_});
  }
  return out;
}

bool MFModel::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(users_.begin(), users_.end(), finite) &&
         std::all_of(items_.begin(), items_.end(), finite);
}

MFModel train_mf_bpr(const Corpus& train, const TrainConfig& config,
                     std::span<const BprTriple> extra) {
  config.validate();
  if (train.empty() && extra.empty()) throw EmptyCorpus("BPR training set is empty");
  for (const auto& t : extra) {
    if (t.user.index() >= train.n_users() || t.positive.index() >= train.n_items() ||
        t.negative.index() >= train.n_items()) {
      throw IdOutOfRange("augmented triple outside the corpus id space");
    }
  }

  std::mt19937_64 rng(config.rng_seed);
  MFModel model(train.n_users(), train.n_items(), config.dimension);
  std::normal_distribution<double> init(0.0, config.init_std);
  if (config.init_std > 0.0) {
    for (auto& v : model.user_parameters()) v = init(rng);
    for (auto& v : model.item_parameters()) v = init(rng);
  }

  NegativeSampler sampler(train, rng);
  const auto& xs = train.interactions();
  // Slots [0, n_observed) are observed positives, the rest index into extra.
  std::vector<std::size_t> order(xs.size() + extra.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> scratch;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto slot : order) {
      if (slot >= xs.size()) {
        bpr_step(model, extra[slot - xs.size()], config.learning_rate, config.l2_regularization,
                 scratch);
        continue;
      }
      const auto& x = xs[slot];
      for (std::size_t n = 0; n < config.negatives_per_positive; ++n) {
        auto neg = sampler.draw(x.user);
        if (!neg) break;
        bpr_step(model, {x.user, x.item, *neg, TripleOrigin::Observed}, config.learning_rate,
                 config.l2_regularization, scratch);
      }
    }
    if (!model.all_finite()) {
      throw DivergedTraining(fmt::format("non-finite MF parameter after epoch {}", epoch + 1));
    }
  }
  return model;
}

double bpr_loss(const MFModel& model, std::span<const BprTriple> triples) {
  double loss = 0.0;
  for (const auto& t : triples) {
    loss += softplus(-(model.score(t.user, t.positive) - model.score(t.user, t.negative)));
  }
  return loss;
}

std::vector<BprTriple> sample_bpr_triples(const Corpus& train, std::size_t negatives_per_positive,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NegativeSampler sampler(train, rng);
  std::vector<BprTriple> out;
  out.reserve(train.size() * negatives_per_positive);
  for (const auto& x : train.interactions()) {
    for (std::size_t n = 0; n < negatives_per_positive; ++n) {
      auto neg = sampler.draw(x.user);
      if (!neg) break;
      out.push_back({x.user, x.item, *neg, TripleOrigin::Observed});
    }
  }
  return out;
}

}  // namespace hybridrec
