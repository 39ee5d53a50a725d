#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "hybridrec/augment.hpp"
#include "hybridrec/errors.hpp"
#include "sampling.hpp"

namespace hybridrec {

using detail::Rng;
using json = nlohmann::ordered_json;

namespace {

/// `count` distinct positions out of 0..n-1, in draw order.
std::vector<std::size_t> draw_positions(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t k = 0; k < count; ++k) {
    std::swap(pool[k], pool[k + detail::uniform_index(rng, n - k)]);
  }
  pool.resize(count);
  return pool;
}

class ExampleBuilder {
 public:
  ExampleBuilder(const Corpus& train, const InstructionOptions& options)
      : train_(train), options_(options), history_(train) {}

  std::optional<InstructionRecord> build(PromptTask task, UserId user, Rng& rng) const {
    switch (task) {
      case PromptTask::ListwiseRank: return listwise(user, rng);
      case PromptTask::PointwiseRate:
      case PromptTask::RatingPredict: return rating(task, user, rng);
      case PromptTask::PairRank: return pair(user, rng);
      case PromptTask::NextItemPick: return next(user, rng);
      case PromptTask::AttributeElicit: break;
    }
    throw ArgumentError("no instruction template for task " + std::string(task_name(task)));
  }

 private:
  const Interaction& at(UserId u, std::size_t pos) const {
    return train_.interactions()[history_.interactions(u)[pos]];
  }

  /// History made of the user's interactions outside `excluded`, oldest
  /// first, truncated to the most recent entries.
  std::vector<HistoryEntry> history_without(UserId u, const std::vector<std::size_t>& excluded,
                                            std::size_t end, bool with_ratings) const {
    std::vector<HistoryEntry> out;
    for (std::size_t p = 0; p < end; ++p) {
      if (std::find(excluded.begin(), excluded.end(), p) != excluded.end()) continue;
      const auto& x = at(u, p);
      out.push_back({train_.display_title(x.item), with_ratings ? x.rating : std::nullopt});
    }
    const auto limit = options_.history_limit;
    if (limit > 0 && out.size() > limit) out.erase(out.begin(), out.end() - static_cast<long>(limit));
    return out;
  }

  /// Rating first; among equal (or absent) ratings the more recent wins.
  bool preferred(UserId u, std::size_t a, std::size_t b) const {
    const auto ra = at(u, a).rating.value_or(0.0);
    const auto rb = at(u, b).rating.value_or(0.0);
    if (ra != rb) return ra > rb;
    return a > b;
  }

  InstructionRecord finish(PromptTask task, UserId u, PromptContext ctx, std::string output) const {
    ctx.instruction = default_instruction(task, options_.noun);
    auto input = render_prompt_input(task, ctx);
    return {task, std::move(ctx.instruction), std::move(input), std::move(output), u};
  }

  InstructionRecord listwise(UserId u, Rng& rng) const {
    const auto n = history_.items(u).size();
    const auto m = std::min(options_.list_size, n - 1);
    const auto picked = draw_positions(n, m, rng);
    PromptContext ctx;
    ctx.history = history_without(u, picked, n, false);
    for (auto p : picked) ctx.candidates.push_back(train_.display_title(at(u, p).item));
    auto order = picked;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return preferred(u, a, b); });
    std::vector<std::string> titles;
    for (auto p : order) titles.push_back(train_.display_title(at(u, p).item));
    return finish(PromptTask::ListwiseRank, u, std::move(ctx), join_titles(titles));
  }

  std::optional<InstructionRecord> rating(PromptTask task, UserId u, Rng& rng) const {
    const auto n = history_.items(u).size();
    const auto t = detail::uniform_index(rng, n);
    const auto& target = at(u, t);
    if (!target.rating) return std::nullopt;
    PromptContext ctx;
    ctx.history = history_without(u, {t}, n, true);
    ctx.candidates = {train_.display_title(target.item)};
    return finish(task, u, std::move(ctx), format_rating(*target.rating));
  }

  InstructionRecord pair(UserId u, Rng& rng) const {
    const auto n = history_.items(u).size();
    const auto picked = draw_positions(n, 2, rng);
    PromptContext ctx;
    ctx.history = history_without(u, picked, n, false);
    for (auto p : picked) ctx.candidates.push_back(train_.display_title(at(u, p).item));
    const bool first = preferred(u, picked[0], picked[1]);
    const auto& win = ctx.candidates[first ? 0 : 1];
    const auto& lose = ctx.candidates[first ? 1 : 0];
    return finish(PromptTask::PairRank, u, ctx, win + "; " + lose);
  }

  InstructionRecord next(UserId u, Rng& rng) const {
    const auto& items = history_.items(u);
    const auto t = 1 + detail::uniform_index(rng, items.size() - 1);
    const auto target = items[t];
    const auto mask = detail::item_mask(train_.n_items(), items);
    auto offered = detail::sample_unmasked(mask, options_.list_size - 1, rng);
    offered.insert(offered.begin() + static_cast<long>(detail::uniform_index(rng, offered.size() + 1)),
                   target);
    PromptContext ctx;
    ctx.history = history_without(u, {}, t, false);
    for (auto i : offered) ctx.candidates.push_back(train_.display_title(i));
    return finish(PromptTask::NextItemPick, u, std::move(ctx), train_.display_title(target));
  }

  const Corpus& train_;
  const InstructionOptions& options_;
  PromptHistory history_;
};

}  // namespace

std::vector<InstructionRecord> build_instruction_dataset(const SplitCorpus& split,
                                                         std::span<const PromptTask> tasks,
                                                         std::size_t per_task, std::uint64_t seed,
                                                         const InstructionOptions& options) {
  if (per_task < 1) throw DomainError("per_task must be >= 1");
  if (options.list_size < 2) throw DomainError("list_size must be >= 2");
  const auto min_n = std::max<std::size_t>(options.min_interactions, 3);
  const auto& train = split.train;
  for (auto task : tasks) {
    if ((task == PromptTask::PointwiseRate || task == PromptTask::RatingPredict) &&
        !train.has_ratings()) {
      throw ArgumentError("task " + std::string(task_name(task)) + " needs explicit ratings");
    }
  }

  const auto degrees = train.user_degrees();
  std::vector<UserId> eligible;
  for (std::size_t u = 0; u < degrees.size(); ++u) {
    if (degrees[u] >= min_n) eligible.emplace_back(u);
  }
  if (eligible.empty()) {
    throw InsufficientUsers(fmt::format("no user has {} or more train interactions", min_n));
  }

  const ExampleBuilder builder(train, options);
  Rng rng(seed);
  std::vector<InstructionRecord> out;
  std::unordered_set<std::string> seen;
  for (auto task : tasks) {
    for (std::size_t k = 0; k < per_task; ++k) {
      const auto user = eligible[detail::uniform_index(rng, eligible.size())];
      auto record = builder.build(task, user, rng);
      if (!record) continue;
      auto key = record->instruction;
      key.push_back('\0');
      key += record->input;
      if (seen.insert(std::move(key)).second) out.push_back(std::move(*record));
    }
  }
  return out;
}

void export_instructions(std::span<const InstructionRecord> records,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) {
    json line;
    line["instruction"] = r.instruction;
    line["input"] = r.input;
    line["output"] = r.output;
    out << line.dump() << '\n';
  }
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

std::vector<InstructionRecord> import_instructions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<InstructionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw MalformedRecord(path.string(), line_no, "not a JSON object");
    }
    InstructionRecord r;
    try {
      r.instruction = doc.at("instruction").get<std::string>();
      r.input = doc.at("input").get<std::string>();
      r.output = doc.at("output").get<std::string>();
    } catch (const json::exception& e) {
      throw MalformedRecord(path.string(), line_no, e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace hybridrec
