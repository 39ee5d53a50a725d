#include <algorithm>
#include <charconv>
#include <cmath>

#include "hybridrec/errors.hpp"
#include "hybridrec/llmlink.hpp"

namespace hybridrec {

std::string_view task_name(PromptTask task) {
  switch (task) {
    case PromptTask::ListwiseRank: return "listwise";
    case PromptTask::PointwiseRate: return "pointwise";
    case PromptTask::RatingPredict: return "rating";
    case PromptTask::PairRank: return "pair";
    case PromptTask::NextItemPick: return "next";
    case PromptTask::AttributeElicit: return "attributes";
  }
  return "unknown";
}

PromptTask parse_task(std::string_view name) {
  for (auto t : {PromptTask::ListwiseRank, PromptTask::PointwiseRate, PromptTask::RatingPredict,
                 PromptTask::PairRank, PromptTask::NextItemPick, PromptTask::AttributeElicit}) {
    if (task_name(t) == name) return t;
  }
  throw ArgumentError("unknown prompt task '" + std::string(name) + "'");
}

namespace {

bool is_rating_task(PromptTask task) {
  return task == PromptTask::RatingPredict || task == PromptTask::PointwiseRate;
}

std::string render_entries(const std::vector<HistoryEntry>& entries, bool with_ratings) {
  std::string out;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (k > 0) out += "; ";
    out += entries[k].title;
    if (with_ratings && entries[k].rating) out += ": " + format_rating(*entries[k].rating);
  }
  return out;
}

void require_fields(PromptTask task, const PromptContext& ctx) {
  const auto name = std::string(task_name(task));
  if (ctx.instruction.empty()) throw MissingField(name, "instruction");
  if (task != PromptTask::AttributeElicit && ctx.history.empty()) {
    throw MissingField(name, "history");
  }
  switch (task) {
    case PromptTask::ListwiseRank:
    case PromptTask::NextItemPick:
      if (ctx.candidates.empty()) throw MissingField(name, "candidates");
      break;
    case PromptTask::PairRank:
      if (ctx.candidates.size() != 2) throw MissingField(name, "exactly two candidates");
      break;
    case PromptTask::RatingPredict:
    case PromptTask::PointwiseRate:
    case PromptTask::AttributeElicit:
      if (ctx.candidates.size() != 1) throw MissingField(name, "a single target item");
      break;
  }
}

}  // namespace

std::string format_rating(double r) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, r);
  return std::string(buf, end);
}

std::string join_titles(std::span<const std::string> titles) {
  std::string out;
  for (std::size_t k = 0; k < titles.size(); ++k) {
    if (k > 0) out += "; ";
    out += titles[k];
  }
  return out;
}

std::string default_instruction(PromptTask task, std::string_view noun,
                                std::span<const std::string> attribute_keys) {
  const std::string n(noun);
  switch (task) {
    case PromptTask::ListwiseRank:
      return "Order the candidate " + n +
             "s from most to least likely to appeal to the user, given the interaction history.";
    case PromptTask::PointwiseRate:
      return "Estimate the rating the user would give the candidate " + n +
             ", given the rating history.";
    case PromptTask::RatingPredict:
      return "Given the user's past " + n + " ratings, predict the rating for the candidate " + n +
             ".";
    case PromptTask::PairRank:
      return "Given the interaction history, list the two candidate " + n +
             "s with the one the user prefers first.";
    case PromptTask::NextItemPick:
      return "Given the interaction history, name the candidate " + n +
             " the user is most likely to choose next.";
    case PromptTask::AttributeElicit: {
      std::string keys;
      for (std::size_t k = 0; k < attribute_keys.size(); ++k) {
        if (k > 0) keys += ", ";
        keys += attribute_keys[k];
      }
      return "Provide the following attributes of the candidate " + n +
             ", one per line as 'Name: value': " + keys + ".";
    }
  }
  return {};
}

std::string render_prompt_input(PromptTask task, const PromptContext& ctx) {
  require_fields(task, ctx);
  const bool rated = is_rating_task(task);
  std::string out;
  if (!ctx.history.empty()) {
    out += rated ? "Rating History: " : "Interaction History: ";
    out += render_entries(ctx.history, rated);
    out += '\n';
  }
  const bool single_target = rated || task == PromptTask::AttributeElicit;
  out += single_target ? "Candidate Item: " : "Candidate Items: ";
  out += join_titles(ctx.candidates);
  out += '\n';
  if (ctx.similar_user_history) {
    out += rated ? "Similar User Rating History: " : "Similar User Interaction History: ";
    out += render_entries(*ctx.similar_user_history, rated);
    out += '\n';
  }
  if (ctx.conventional_prediction) {
    out += "Conventional Model Prediction: " + *ctx.conventional_prediction + '\n';
  }
  return out;
}

std::string build_prompt(PromptTask task, const PromptContext& ctx) {
  auto input = render_prompt_input(task, ctx);
  return "Instruction: " + ctx.instruction + '\n' + input + "Output:";
}

PromptContext augment_with_similar_user(PromptContext ctx, std::vector<HistoryEntry> history,
                                        std::size_t max_items) {
  if (history.empty()) throw EmptyHistory();
  if (max_items > 0 && history.size() > max_items) {
    history.erase(history.begin(), history.end() - static_cast<long>(max_items));
  }
  ctx.similar_user_history = std::move(history);
  return ctx;
}

PromptContext augment_with_model_prediction(PromptContext ctx, std::string prediction) {
  if (prediction.empty()) throw EmptyPrediction();
  ctx.conventional_prediction = std::move(prediction);
  return ctx;
}

}  // namespace hybridrec
