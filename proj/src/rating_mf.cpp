#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "hybridrec/errors.hpp"
#include "hybridrec/recmodels.hpp"

namespace hybridrec {

RatingModel::RatingModel(std::size_t n_users, std::size_t n_items, std::size_t dimension,
                         RatingScale rating_scale)
    : user_bias(n_users, 0.0),
      item_bias(n_items, 0.0),
      factors(n_users, n_items, dimension),
      scale(rating_scale),
      user_seen(n_users, false),
      item_seen(n_items, false) {}

double RatingModel::raw(UserId u, ItemId i) const {
  return global_mean + user_bias.at(u.index()) + item_bias.at(i.index()) + factors.score(u, i);
}

RatingModel train_rating_mf(const Corpus& train, const TrainConfig& config) {
  config.validate();
  std::vector<const Interaction*> rated;
  for (const auto& x : train.interactions()) {
    if (x.rating) rated.push_back(&x);
  }
  if (rated.empty()) throw EmptyCorpus("no rated interactions to train a rating model");

  RatingModel model(train.n_users(), train.n_items(), config.dimension, train.rating_scale());
  double sum = 0.0;
  for (const auto* x : rated) {
    sum += *x->rating;
    model.user_seen[x->user.index()] = true;
    model.item_seen[x->item.index()] = true;
  }
  model.global_mean = sum / static_cast<double>(rated.size());

  std::mt19937_64 rng(config.rng_seed);
  if (config.init_std > 0.0) {
    std::normal_distribution<double> init(0.0, config.init_std);
    for (auto& v : model.factors.user_parameters()) v = init(rng);
    for (auto& v : model.factors.item_parameters()) v = init(rng);
  }

  const double lr = config.learning_rate;
  const double reg = config.l2_regularization;
  std::vector<std::size_t> order(rated.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> eu_old;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto n : order) {
      const auto& x = *rated[n];
      const auto u = x.user.index();
      const auto i = x.item.index();
      const double err = *x.rating - model.raw(x.user, x.item);
      model.user_bias[u] += lr * (err - reg * model.user_bias[u]);
      model.item_bias[i] += lr * (err - reg * model.item_bias[i]);
      auto eu = model.factors.user_embedding(x.user);
      auto ei = model.factors.item_embedding(x.item);
      eu_old.assign(eu.begin(), eu.end());
      for (std::size_t k = 0; k < eu.size(); ++k) {
        eu[k] += lr * (err * ei[k] - reg * eu[k]);
        ei[k] += lr * (err * eu_old[k] - reg * ei[k]);
      }
    }
    const bool finite =
        model.factors.all_finite() &&
        std::all_of(model.user_bias.begin(), model.user_bias.end(),
                    [](double v) { return std::isfinite(v); }) &&
        std::all_of(model.item_bias.begin(), model.item_bias.end(),
                    [](double v) { return std::isfinite(v); });
    if (!finite) {
      throw DivergedTraining(fmt::format("non-finite rating parameter after epoch {}", epoch + 1));
    }
  }
  return model;
}

double predict_rating(const RatingModel& model, UserId u, ItemId i) {
  if (u.index() >= model.n_users()) throw IdOutOfRange(fmt::format("user {}", u.value));
  if (i.index() >= model.n_items()) throw IdOutOfRange(fmt::format("item {}", i.value));
  const bool user_known = model.user_seen[u.index()];
  const bool item_known = model.item_seen[i.index()];
  double r = model.global_mean;
  if (user_known && item_known) {
    r = model.raw(u, i);
  } else if (item_known) {
    r += model.item_bias[i.index()];
  } else if (user_known) {
    r += model.user_bias[u.index()];
  }
  return model.scale.clip(r);
}

}  // namespace hybridrec
