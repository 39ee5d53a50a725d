#include "hybridrec/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "hybridrec/errors.hpp"

namespace hybridrec {

DatasetFormat parse_dataset_format(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "ml100k" || lower == "ml-100k" || lower == "movielens100k") {
    return DatasetFormat::MovieLens100K;
  }
  if (lower == "ml1m" || lower == "ml-1m" || lower == "movielens1m") {
    return DatasetFormat::MovieLens1M;
  }
  if (lower == "bookcrossing" || lower == "bx") return DatasetFormat::BookCrossing;
  if (lower == "csv" || lower == "genericcsv" || lower == "generic") {
    return DatasetFormat::GenericCSV;
  }
  throw UnknownFormat(std::string(name));
}

std::string_view dataset_format_name(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::MovieLens100K: return "ml100k";
    case DatasetFormat::MovieLens1M: return "ml1m";
    case DatasetFormat::BookCrossing: return "bookcrossing";
    case DatasetFormat::GenericCSV: return "csv";
  }
  return "unknown";
}

Corpus::Corpus(std::vector<Interaction> interactions, Catalog catalog, RatingScale scale,
               std::vector<std::string> user_keys, std::vector<std::string> item_keys)
    : interactions_(std::move(interactions)),
      catalog_(std::move(catalog)),
      scale_(scale),
      user_keys_(std::move(user_keys)),
      item_keys_(std::move(item_keys)) {
  catalog_.items.resize(item_keys_.size());
  catalog_.users.resize(user_keys_.size());
  for (const auto& x : interactions_) {
    if (x.user.index() >= user_keys_.size() || x.item.index() >= item_keys_.size()) {
      throw IdOutOfRange(fmt::format("interaction ({}, {}) outside {}x{} id space", x.user.value,
                                     x.item.value, user_keys_.size(), item_keys_.size()));
    }
  }
}

bool Corpus::has_ratings() const {
  return std::any_of(interactions_.begin(), interactions_.end(),
                     [](const Interaction& x) { return x.rating.has_value(); });
}

std::vector<std::vector<std::size_t>> Corpus::user_sequences() const {
  std::vector<std::vector<std::size_t>> seqs(n_users());
  for (std::size_t k = 0; k < interactions_.size(); ++k) {
    seqs[interactions_[k].user.index()].push_back(k);
  }
  for (auto& seq : seqs) {
    std::stable_sort(seq.begin(), seq.end(), [&](std::size_t a, std::size_t b) {
      return interactions_[a].timestamp < interactions_[b].timestamp;
    });
  }
  return seqs;
}

std::vector<std::vector<ItemId>> Corpus::item_sequences() const {
  auto seqs = user_sequences();
  std::vector<std::vector<ItemId>> out(seqs.size());
  for (std::size_t u = 0; u < seqs.size(); ++u) {
    out[u].reserve(seqs[u].size());
    for (auto k : seqs[u]) out[u].push_back(interactions_[k].item);
  }
  return out;
}

std::vector<std::size_t> Corpus::user_degrees() const {
  std::vector<std::size_t> deg(n_users(), 0);
  for (const auto& x : interactions_) ++deg[x.user.index()];
  return deg;
}

std::vector<std::size_t> Corpus::item_degrees() const {
  std::vector<std::size_t> deg(n_items(), 0);
  for (const auto& x : interactions_) ++deg[x.item.index()];
  return deg;
}

namespace {

bool ends_with_year(const std::string& title) {
  // "... (1995)"
  if (title.size() < 6 || title.back() != ')') return false;
  const auto open = title.size() - 6;
  if (title[open] != '(') return false;
  return std::all_of(title.begin() + static_cast<long>(open) + 1, title.end() - 1,
                     [](unsigned char c) { return std::isdigit(c) != 0; });
}

}  // namespace

std::string item_display_title(const AttributeMap& attrs, std::string_view key) {
  auto title = attrs.find("Title");
  if (title == attrs.end() || title->second.empty()) return "Item " + std::string(key);
  auto year = attrs.find("Year");
  if (year != attrs.end() && !year->second.empty() && !ends_with_year(title->second)) {
    return title->second + " (" + year->second + ")";
  }
  return title->second;
}

std::string Corpus::display_title(ItemId item) const {
  return item_display_title(catalog_.items.at(item.index()), item_key(item));
}

Corpus Corpus::with_catalog(Catalog catalog) const {
  if (catalog.items.size() != n_items() || catalog.users.size() != n_users()) {
    throw ArgumentError("replacement catalog does not cover the corpus id space");
  }
  return Corpus(interactions_, std::move(catalog), scale_, user_keys_, item_keys_);
}

Corpus Corpus::with_interactions(std::vector<Interaction> interactions) const {
  return Corpus(std::move(interactions), catalog_, scale_, user_keys_, item_keys_);
}

std::size_t SplitCorpus::n_test() const {
  return static_cast<std::size_t>(
      std::count_if(test.begin(), test.end(), [](const auto& t) { return t.has_value(); }));
}

Corpus apply_k_core(const Corpus& corpus, std::size_t k) {
  if (k < 1) throw DomainError("k-core threshold must be >= 1");
  const auto& xs = corpus.interactions();
  std::vector<bool> alive(xs.size(), true);
  auto user_deg = corpus.user_degrees();
  auto item_deg = corpus.item_degrees();

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t n = 0; n < xs.size(); ++n) {
      if (!alive[n]) continue;
      if (user_deg[xs[n].user.index()] < k || item_deg[xs[n].item.index()] < k) {
        alive[n] = false;
        changed = true;
      }
    }
    if (!changed) break;
    std::fill(user_deg.begin(), user_deg.end(), 0);
    std::fill(item_deg.begin(), item_deg.end(), 0);
    for (std::size_t n = 0; n < xs.size(); ++n) {
      if (!alive[n]) continue;
      ++user_deg[xs[n].user.index()];
      ++item_deg[xs[n].item.index()];
    }
  }

  constexpr auto kGone = static_cast<std::uint32_t>(-1);
  std::vector<std::uint32_t> user_map(corpus.n_users(), kGone);
  std::vector<std::uint32_t> item_map(corpus.n_items(), kGone);
  std::vector<std::string> user_keys;
  std::vector<std::string> item_keys;
  Catalog catalog;
  for (std::size_t u = 0; u < corpus.n_users(); ++u) {
    if (user_deg[u] == 0) continue;
    user_map[u] = static_cast<std::uint32_t>(user_keys.size());
    user_keys.push_back(corpus.user_keys()[u]);
    catalog.users.push_back(corpus.catalog().users[u]);
  }
  for (std::size_t i = 0; i < corpus.n_items(); ++i) {
    if (item_deg[i] == 0) continue;
    item_map[i] = static_cast<std::uint32_t>(item_keys.size());
    item_keys.push_back(corpus.item_keys()[i]);
    catalog.items.push_back(corpus.catalog().items[i]);
  }

  std::vector<Interaction> kept;
  for (std::size_t n = 0; n < xs.size(); ++n) {
    if (!alive[n]) continue;
    auto x = xs[n];
    x.user = UserId(user_map[x.user.index()]);
    x.item = ItemId(item_map[x.item.index()]);
    kept.push_back(x);
  }
  if (kept.empty()) throw EmptyAfterFiltering(k);
  return Corpus(std::move(kept), std::move(catalog), corpus.rating_scale(), std::move(user_keys),
                std::move(item_keys));
}

SplitCorpus leave_one_out_split(const Corpus& corpus) {
  if (corpus.empty()) throw EmptyCorpus();
  const auto& xs = corpus.interactions();
  std::vector<bool> held_out(xs.size(), false);
  SplitCorpus split;
  split.validation.resize(corpus.n_users());
  split.test.resize(corpus.n_users());

  auto seqs = corpus.user_sequences();
  for (std::size_t u = 0; u < seqs.size(); ++u) {
    const auto& seq = seqs[u];
    if (seq.size() < 3) continue;
    const auto test_idx = seq[seq.size() - 1];
    const auto valid_idx = seq[seq.size() - 2];
    split.test[u] = xs[test_idx];
    split.validation[u] = xs[valid_idx];
    held_out[test_idx] = true;
    held_out[valid_idx] = true;
  }

  std::vector<Interaction> train;
  train.reserve(xs.size());
  for (std::size_t n = 0; n < xs.size(); ++n) {
    if (!held_out[n]) train.push_back(xs[n]);
  }
  split.train = corpus.with_interactions(std::move(train));
  return split;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  if (corpus.empty() || corpus.n_users() == 0 || corpus.n_items() == 0) throw EmptyCorpus();
  CorpusStats s;
  s.n_users = corpus.n_users();
  s.n_items = corpus.n_items();
  s.n_ratings = corpus.size();
  s.density = static_cast<double>(s.n_ratings) /
              (static_cast<double>(s.n_users) * static_cast<double>(s.n_items));
  return s;
}

void write_generic_csv(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const bool rated = corpus.has_ratings();
  out << (rated ? "user,item,rating,timestamp\n" : "user,item,timestamp\n");
  for (const auto& x : corpus.interactions()) {
    out << corpus.user_key(x.user) << ',' << corpus.item_key(x.item) << ',';
    if (rated) {
      if (x.rating) out << fmt::format("{}", *x.rating);
      out << ',';
    }
    out << x.timestamp << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace hybridrec
