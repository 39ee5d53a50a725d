#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hybridrec/corpus.hpp"
#include "hybridrec/llmlink.hpp"
#include "hybridrec/recmodels.hpp"
#include "hybridrec/types.hpp"

namespace hybridrec {

/// Own-history entries shown in a prompt are capped at this many (most recent).
inline constexpr std::size_t kDefaultHistoryLimit = 20;

/// Per-user interaction sequences of a corpus, rendered as prompt history.
class PromptHistory {
 public:
  explicit PromptHistory(const Corpus& corpus);

  /// Oldest first, limited to the most recent `limit` entries (0 = all).
  /// Ratings are attached when `with_ratings` is set.
  [[nodiscard]] std::vector<HistoryEntry> entries(UserId u, bool with_ratings,
                                                  std::size_t limit = kDefaultHistoryLimit) const;
  [[nodiscard]] const std::vector<ItemId>& items(UserId u) const { return items_.at(u.index()); }
  [[nodiscard]] const std::vector<std::size_t>& interactions(UserId u) const {
    return sequences_.at(u.index());
  }

 private:
  const Corpus* corpus_;
  std::vector<std::vector<std::size_t>> sequences_;
  std::vector<std::vector<ItemId>> items_;
};

/// Item noun used in instructions: "movie" for MovieLens, "book" for
/// BookCrossing, "item" otherwise.
std::string_view item_noun(DatasetFormat format);

struct AugmentOptions {
  std::string noun = "movie";
  std::size_t history_limit = kDefaultHistoryLimit;
};

struct AugmentReport {
  std::size_t requested = 0;
  std::size_t emitted = 0;
  std::size_t skipped = 0;

  bool operator==(const AugmentReport&) const = default;
};

struct DirectAugmentation {
  std::vector<BprTriple> triples;
  AugmentReport report;
};

/// For every user with history, samples `pairs_per_user` distinct unordered
/// pairs of items the user has not interacted with, asks the client which one
/// the user prefers, and emits (u, preferred, other) triples. Responses that
/// cannot be parsed are skipped and counted; client errors propagate.
DirectAugmentation augment_direct(const Corpus& train, LlmClient& client,
                                  std::size_t pairs_per_user, std::uint64_t seed,
                                  const AugmentOptions& options = {});

struct AugmentedSequence {
  UserId user;
  std::vector<ItemId> items;
  std::optional<std::size_t> inserted_at;

  bool operator==(const AugmentedSequence&) const = default;
};

struct SequentialAugmentation {
  std::vector<AugmentedSequence> sequences;
  AugmentReport report;
};

/// Copy of `sequence` with `item` placed before position `pos` (pos == size
/// appends).
std::vector<ItemId> insert_at(std::vector<ItemId> sequence, ItemId item, std::size_t pos);

/// For every user with history: offers `candidates_per_user` un-interacted
/// items, takes the client's pick and inserts it at a uniformly drawn
/// position in [0, len]. Unparseable answers leave the sequence unchanged.
SequentialAugmentation augment_sequential(const Corpus& train, LlmClient& client,
                                          std::size_t candidates_per_user, std::uint64_t seed,
                                          const AugmentOptions& options = {});

/// Interactions of `train` rebuilt from augmented sequences. An inserted item
/// takes its predecessor's timestamp (its successor's at the front) and has
/// no rating.
Corpus apply_sequences(const Corpus& train, std::span<const AugmentedSequence> sequences);

/// Attribute names elicited per dataset: MovieLens {Movie Director, Movie
/// Star}, BookCrossing {Book Genres, Page Length}; empty for GenericCSV.
std::vector<std::string> default_attribute_targets(DatasetFormat format);

struct AttributeAugmentation {
  Catalog catalog;
  AugmentReport report;
};

/// Asks for `targets` of every item and merges the answers into the item's
/// attributes. Existing keys are never overwritten.
AttributeAugmentation augment_attributes(const Catalog& catalog,
                                         std::span<const std::string> item_keys,
                                         LlmClient& client,
                                         std::span<const std::string> targets,
                                         const AugmentOptions& options = {});

// ---------------------------------------------------------------------------
// Instruction data.

struct InstructionRecord {
  PromptTask task = PromptTask::ListwiseRank;
  std::string instruction;
  std::string input;
  std::string output;
  /// Source user. Not exported.
  std::optional<UserId> user;

  bool operator==(const InstructionRecord&) const = default;
};

struct InstructionOptions {
  std::string noun = "movie";
  std::size_t history_limit = kDefaultHistoryLimit;
  /// Candidate list size for listwise and next-item examples.
  std::size_t list_size = 5;
  /// Users need at least this many train interactions.
  std::size_t min_interactions = 3;
};

/// Samples `per_task` examples per task from the train split. Outputs come
/// from the observed data: listwise lists are sorted by rating (most recent
/// first when unrated or tied), rating tasks give the observed rating, pair
/// tasks put the preferred item first and next-item tasks name the item the
/// user actually chose next. Duplicate (instruction, input) pairs are dropped.
std::vector<InstructionRecord> build_instruction_dataset(const SplitCorpus& split,
                                                         std::span<const PromptTask> tasks,
                                                         std::size_t per_task, std::uint64_t seed,
                                                         const InstructionOptions& options = {});

/// JSON lines: {"instruction": ..., "input": ..., "output": ...}.
void export_instructions(std::span<const InstructionRecord> records,
                         const std::filesystem::path& path);
/// Reads an exported file. Task and user are not stored and come back unset.
std::vector<InstructionRecord> import_instructions(const std::filesystem::path& path);

}  // namespace hybridrec
