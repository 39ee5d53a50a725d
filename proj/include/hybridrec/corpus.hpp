#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hybridrec/types.hpp"

namespace hybridrec {

struct Interaction {
  UserId user;
  ItemId item;
  std::optional<double> rating;
  std::int64_t timestamp = 0;

  bool operator==(const Interaction&) const = default;
};

/// Attribute name -> text value. Keys are case-sensitive.
using AttributeMap = std::map<std::string, std::string>;

/// Side information indexed by dense id. Every id in the corpus id space has
/// an entry, possibly empty.
struct Catalog {
  std::vector<AttributeMap> items;
  std::vector<AttributeMap> users;

  bool operator==(const Catalog&) const = default;
};

/// Title attribute plus " (Year)" when known; "Item <key>" without a title.
std::string item_display_title(const AttributeMap& attributes, std::string_view key);

enum class DatasetFormat { MovieLens100K, MovieLens1M, BookCrossing, GenericCSV };

/// Accepts "ml100k", "ml1m", "bookcrossing", "csv" (and the enum spellings).
DatasetFormat parse_dataset_format(std::string_view name);
std::string_view dataset_format_name(DatasetFormat format);

/// Immutable user-item interaction data with dense ids.
///
/// Ids are dense: users are 0..n_users-1 and items 0..n_items-1. The original
/// dataset keys are kept so results can be reported in source terms. The id
/// space may contain entities with no interactions (for example, items that
/// only occur in a held-out split).
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Interaction> interactions, Catalog catalog, RatingScale scale,
         std::vector<std::string> user_keys, std::vector<std::string> item_keys);

  [[nodiscard]] const std::vector<Interaction>& interactions() const { return interactions_; }
  [[nodiscard]] const Catalog& catalog() const { return catalog_; }
  [[nodiscard]] RatingScale rating_scale() const { return scale_; }
  [[nodiscard]] std::size_t n_users() const { return user_keys_.size(); }
  [[nodiscard]] std::size_t n_items() const { return item_keys_.size(); }
  [[nodiscard]] std::size_t size() const { return interactions_.size(); }
  [[nodiscard]] bool empty() const { return interactions_.empty(); }

  [[nodiscard]] const std::vector<std::string>& user_keys() const { return user_keys_; }
  [[nodiscard]] const std::vector<std::string>& item_keys() const { return item_keys_; }
  [[nodiscard]] const std::string& user_key(UserId u) const { return user_keys_.at(u.index()); }
  [[nodiscard]] const std::string& item_key(ItemId i) const { return item_keys_.at(i.index()); }

  /// True when at least one interaction carries a rating.
  [[nodiscard]] bool has_ratings() const;

  /// Per user, indices into interactions() ordered by timestamp; ties keep
  /// input order.
  [[nodiscard]] std::vector<std::vector<std::size_t>> user_sequences() const;
  /// Per user, item ids ordered as in user_sequences().
  [[nodiscard]] std::vector<std::vector<ItemId>> item_sequences() const;

  [[nodiscard]] std::vector<std::size_t> user_degrees() const;
  [[nodiscard]] std::vector<std::size_t> item_degrees() const;

  /// Human-readable item title used in prompts: the Title attribute, with
  /// " (Year)" appended when a Year attribute exists and the title does not
  /// already end in a parenthesised year. Falls back to "Item <key>".
  [[nodiscard]] std::string display_title(ItemId item) const;

  /// Same data with a replacement catalog (must cover the same id space).
  [[nodiscard]] Corpus with_catalog(Catalog catalog) const;
  /// Same id space and catalog, different interaction list.
  [[nodiscard]] Corpus with_interactions(std::vector<Interaction> interactions) const;

 private:
  std::vector<Interaction> interactions_;
  Catalog catalog_;
  RatingScale scale_;
  std::vector<std::string> user_keys_;
  std::vector<std::string> item_keys_;
};

struct SplitCorpus {
  /// Same id space and catalog as the source corpus.
  Corpus train;
  /// Indexed by user; empty for users with fewer than three interactions.
  std::vector<std::optional<Interaction>> validation;
  std::vector<std::optional<Interaction>> test;

  [[nodiscard]] std::size_t n_test() const;
};

struct CorpusStats {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t n_ratings = 0;
  double density = 0.0;
};

/// Reads a dataset. MovieLens and BookCrossing take the directory holding the
/// distribution files; GenericCSV takes the CSV file itself.
Corpus ingest(const std::filesystem::path& path, DatasetFormat format);

/// Maximal k-core: iteratively drops users and items with fewer than k
/// interactions. Surviving ids are re-densified in their previous order.
Corpus apply_k_core(const Corpus& corpus, std::size_t k);

/// Per user: latest interaction -> test, second latest -> validation, the
/// rest -> train. Users with fewer than three interactions stay in train.
SplitCorpus leave_one_out_split(const Corpus& corpus);

CorpusStats corpus_stats(const Corpus& corpus);

/// Writes the interactions in GenericCSV form using the original keys.
void write_generic_csv(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace hybridrec
