#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

#include "hybridrec/errors.hpp"
#include "hybridrec/evalkit.hpp"

namespace hybridrec {

namespace {

std::optional<std::size_t> rank_of(std::span<const ItemId> ranked, ItemId target, std::size_t k) {
  if (k < 1) throw DomainError("cutoff k must be >= 1");
  const auto end = ranked.begin() + static_cast<long>(std::min(k, ranked.size()));
  const auto it = std::find(ranked.begin(), end, target);
  if (it == end) return std::nullopt;
  return static_cast<std::size_t>(it - ranked.begin()) + 1;
}

void require_pairs(std::span<const RatingPair> pairs) {
  if (pairs.empty()) throw EmptyInput("no (predicted, actual) pairs");
}

}  // namespace

double hr_at_k(std::span<const ItemId> ranked, ItemId target, std::size_t k) {
  return rank_of(ranked, target, k) ? 1.0 : 0.0;
}

double hr_at_k(const RankedList& ranked, ItemId target, std::size_t k) {
  const auto items = ranked.items();
  return hr_at_k(items, target, k);
}

double ndcg_at_k(std::span<const ItemId> ranked, ItemId target, std::size_t k) {
  const auto r = rank_of(ranked, target, k);
  return r ? 1.0 / std::log2(static_cast<double>(*r) + 1.0) : 0.0;
}

double ndcg_at_k(const RankedList& ranked, ItemId target, std::size_t k) {
  const auto items = ranked.items();
  return ndcg_at_k(items, target, k);
}

double rmse(std::span<const RatingPair> pairs) {
  require_pairs(pairs);
  double sum = 0.0;
  for (const auto& p : pairs) sum += (p.predicted - p.actual) * (p.predicted - p.actual);
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

double mae(std::span<const RatingPair> pairs) {
  require_pairs(pairs);
  double sum = 0.0;
  for (const auto& p : pairs) sum += std::abs(p.predicted - p.actual);
  return sum / static_cast<double>(pairs.size());
}

std::string_view eval_task_name(EvalTask task) {
  return task == EvalTask::TopK ? "topk" : "rating";
}

namespace {

double lookup(const NamedMetrics& metrics, std::string_view name) {
  for (const auto& [key, value] : metrics) {
    if (key == name) return value;
  }
  throw ArgumentError(fmt::format("report has no metric '{}'", name));
}

}  // namespace

double MetricReport::metric(std::string_view name) const { return lookup(metrics, name); }
double MetricReport::baseline_metric(std::string_view name) const { return lookup(baseline, name); }

std::string MetricReport::to_json() const {
  using json = nlohmann::ordered_json;
  auto section = [](const NamedMetrics& m) {
    json out = json::object();
    for (const auto& [key, value] : m) out[key] = value;
    return out;
  };
  json doc;
  doc["task"] = eval_task_name(task);
  doc["backbone"] = backbone;
  doc["n_evaluated"] = n_evaluated;
  doc["llm_failures"] = llm_failures;
  doc["metrics"] = section(metrics);
  doc["baseline"] = section(baseline);
  doc["fingerprint"] = fingerprint_hex(fingerprint);
  return doc.dump(2) + "\n";
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fingerprint_hex(std::uint64_t fingerprint) { return fmt::format("{:016x}", fingerprint); }

}  // namespace hybridrec
