#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "hybridrec/aggregate.hpp"
#include "hybridrec/augment.hpp"
#include "hybridrec/corpus.hpp"
#include "hybridrec/errors.hpp"
#include "hybridrec/evalkit.hpp"
#include "hybridrec/llmlink.hpp"
#include "hybridrec/recmodels.hpp"
#include "run_config.hpp"

#ifndef HYBRIDREC_VERSION
#define HYBRIDREC_VERSION "0.0.0"
#endif

namespace hybridrec::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string version_stamp() { return std::string("hybridrec ") + HYBRIDREC_VERSION; }

// ---------------------------------------------------------------------------
// MemoizingClient

std::string MemoizingClient::key(const CompletionRequest& request) {
  auto k = request.prompt;
  k.push_back('\0');
  if (request.meta.user) k += std::to_string(request.meta.user->value);
  return k;
}

LLMResponse MemoizingClient::complete(const CompletionRequest& request) {
  const auto k = key(request);
  if (auto it = cache_.find(k); it != cache_.end()) {
    ++hits_;
    return it->second;
  }
  auto response = inner_->complete(request);
  cache_.emplace(k, response);
  return response;
}

std::vector<CompletionResult> MemoizingClient::complete_batch(
    std::span<const CompletionRequest> requests) {
  std::vector<CompletionResult> out(requests.size());
  std::vector<CompletionRequest> misses;
  std::vector<std::size_t> miss_index;
  for (std::size_t k = 0; k < requests.size(); ++k) {
    if (auto it = cache_.find(key(requests[k])); it != cache_.end()) {
      out[k].response = it->second;
      ++hits_;
    } else {
      misses.push_back(requests[k]);
      miss_index.push_back(k);
    }
  }
  auto fresh = inner_->complete_batch(misses);
  for (std::size_t m = 0; m < misses.size(); ++m) {
    if (fresh[m].ok()) cache_.emplace(key(misses[m]), *fresh[m].response);
    out[miss_index[m]] = std::move(fresh[m]);
  }
  return out;
}

namespace {

// ---------------------------------------------------------------------------
// Shared plumbing

struct Data {
  DatasetFormat format;
  Corpus full;
  SplitCorpus split;
};

Data load_data(const RunConfig& cfg) {
  if (cfg.dataset.path.empty()) throw ArgumentError("no dataset given (--data)");
  const auto format = parse_dataset_format(cfg.dataset.format);
  auto corpus = ingest(cfg.dataset.path, format);
  if (cfg.dataset.k_core > 0) corpus = apply_k_core(corpus, cfg.dataset.k_core);
  auto split = leave_one_out_split(corpus);
  return {format, std::move(corpus), std::move(split)};
}

fs::path output_dir(const RunConfig& cfg) {
  if (cfg.out.empty()) throw ArgumentError("no output directory given (--out)");
  fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw IoError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

void echo_run_config(const fs::path& dir, std::string_view command, const RunConfig& cfg) {
  json doc;
  doc["version"] = version_stamp();
  doc["command"] = command;
  doc["config"] = to_json(cfg);
  write_json(dir / "run_config.json", doc);
}

json stats_json(const Data& data) {
  const auto s = corpus_stats(data.full);
  json doc;
  doc["format"] = dataset_format_name(data.format);
  doc["users"] = s.n_users;
  doc["items"] = s.n_items;
  doc["interactions"] = s.n_ratings;
  doc["density"] = s.density;
  return doc;
}

void load_mock_attributes(MockOracle& oracle, const Corpus& corpus, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read mock attributes " + path);
  const auto doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw MalformedRecord(path, 0, "expected a JSON object keyed by item");
  }
  std::unordered_map<std::string, ItemId> by_key;
  for (std::size_t i = 0; i < corpus.n_items(); ++i) by_key.emplace(corpus.item_keys()[i], ItemId(i));
  for (const auto& [key, attrs] : doc.items()) {
    auto it = by_key.find(key);
    if (it == by_key.end() || !attrs.is_object()) continue;
    AttributeMap merged = corpus.catalog().items[it->second.index()];
    for (const auto& [name, value] : attrs.items()) {
      if (value.is_string()) merged.insert_or_assign(name, value.get<std::string>());
    }
    oracle.set_attributes(it->second, std::move(merged));
  }
}

std::unique_ptr<MemoizingClient> make_client(const RunConfig& cfg, const Data& data) {
  if (cfg.llm.mock) {
    auto oracle = std::make_unique<MockOracle>(
        MockOracle::from_corpus(data.full, &data.split, cfg.llm.mock_seed, cfg.llm.mock_noise_rate));
    if (!cfg.llm.mock_attributes.empty()) {
      load_mock_attributes(*oracle, data.full, cfg.llm.mock_attributes);
    }
    return std::make_unique<MemoizingClient>(std::move(oracle));
  }
  LLMClientConfig c;
  c.apply_environment();
  if (!cfg.llm.endpoint.empty()) c.endpoint = cfg.llm.endpoint;
  if (!cfg.llm.api_key.empty()) c.api_key = cfg.llm.api_key;
  c.model = cfg.llm.model;
  c.timeout_ms = cfg.llm.timeout_ms;
  c.max_in_flight = cfg.llm.max_in_flight;
  c.max_retries = cfg.llm.max_retries;
  c.max_tokens = cfg.llm.max_tokens;
  if (c.endpoint.empty()) {
    throw ArgumentError("no LLM endpoint: pass --mock, --endpoint or set HYBRIDREC_LLM_URL");
  }
  return std::make_unique<MemoizingClient>(std::make_unique<RemoteLlmClient>(c));
}

void require_same_ids(const IdMaps& stored, const Corpus& corpus, const std::string& path) {
  if (!(stored == IdMaps::from(corpus))) {
    throw ModelFormatError(path + " was trained on a different id space");
  }
}

std::string_view noun_for(const Data& data) { return item_noun(data.format); }

// ---------------------------------------------------------------------------
// Commands

int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
  const auto data = load_data(cfg);
  const auto dir = output_dir(cfg);
  write_generic_csv(data.full, dir / "corpus.csv");
  const auto stats = stats_json(data);
  write_json(dir / "stats.json", stats);
  echo_run_config(dir, "ingest", cfg);
  out << stats.dump(2) << '\n';
  return kOk;
}

int cmd_stats(const RunConfig& cfg, std::ostream& out) {
  const auto data = load_data(cfg);
  const auto stats = stats_json(data);
  if (!cfg.out.empty()) {
    const auto dir = output_dir(cfg);
    write_json(dir / "stats.json", stats);
    echo_run_config(dir, "stats", cfg);
  }
  out << stats.dump(2) << '\n';
  return kOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const auto data = load_data(cfg);
  const auto dir = output_dir(cfg);
  const auto& train = data.split.train;
  const auto ids = IdMaps::from(train);
  const auto path = dir / (cfg.model + ".bin");
  if (cfg.model == "mf_bpr") {
    const auto model = train_mf_bpr(train, cfg.mf_bpr);
    save_model(model, ids, path);
    const auto triples = sample_bpr_triples(train, 1, cfg.mf_bpr.rng_seed);
    out << fmt::format("mf_bpr: {} users x {} items, dim {}, mean BPR loss {:.6f}\n",
                       model.n_users(), model.n_items(), model.dimension(),
                       bpr_loss(model, triples) / static_cast<double>(triples.size()));
  } else if (cfg.model == "rating_mf") {
    const auto model = train_rating_mf(train, cfg.rating_mf);
    save_model(model, ids, path);
    out << fmt::format("rating_mf: global mean {:.4f}\n", model.global_mean);
  } else if (cfg.model == "markov") {
    const auto model = train_markov_seq(train);
    save_model(model, ids, path);
    out << fmt::format("markov: {} transitions\n", model.total_transitions());
  } else {
    throw ArgumentError("unknown model '" + cfg.model + "' (mf_bpr | rating_mf | markov)");
  }
  echo_run_config(dir, "train", cfg);
  out << "wrote " << path.string() << '\n';
  return kOk;
}

json report_json(const AugmentReport& r) {
  json doc;
  doc["requested"] = r.requested;
  doc["emitted"] = r.emitted;
  doc["skipped"] = r.skipped;
  return doc;
}

int cmd_augment(const RunConfig& cfg, std::ostream& out) {
  const auto data = load_data(cfg);
  const auto dir = output_dir(cfg);
  const auto& train = data.split.train;
  auto client = make_client(cfg, data);
  const AugmentOptions options{std::string(noun_for(data)), kDefaultHistoryLimit};
  const auto& kind = cfg.augment.kind;

  json summary;
  summary["kind"] = kind;
  summary["train_interactions"] = train.size();
  if (kind == "direct") {
    const auto result =
        augment_direct(train, *client, cfg.augment.pairs_per_user, cfg.augment.seed, options);
    std::string csv = "user,positive,negative\n";
    for (const auto& t : result.triples) {
      csv += fmt::format("{},{},{}\n", train.user_key(t.user), train.item_key(t.positive),
                         train.item_key(t.negative));
    }
    write_text(dir / "triples.csv", csv);
    write_generic_csv(train, dir / "corpus.csv");
    summary["report"] = report_json(result.report);
    summary["augmented_triples"] = result.triples.size();
  } else if (kind == "sequential") {
    const auto result =
        augment_sequential(train, *client, cfg.augment.candidates_per_user, cfg.augment.seed, options);
    const auto augmented = apply_sequences(train, result.sequences);
    write_generic_csv(augmented, dir / "corpus.csv");
    summary["report"] = report_json(result.report);
    summary["augmented_interactions"] = augmented.size();
  } else if (kind == "attributes") {
    auto targets = cfg.augment.attribute_targets;
    if (targets.empty()) targets = default_attribute_targets(data.format);
    if (targets.empty()) throw ArgumentError("no attribute targets for this dataset (--targets)");
    const auto result = augment_attributes(train.catalog(), train.item_keys(), *client, targets,
                                           options);
    json catalog = json::object();
    for (std::size_t i = 0; i < result.catalog.items.size(); ++i) {
      json attrs = json::object();
      for (const auto& [k, v] : result.catalog.items[i]) attrs[k] = v;
      catalog[train.item_keys()[i]] = std::move(attrs);
    }
    write_json(dir / "catalog.json", catalog);
    write_generic_csv(train, dir / "corpus.csv");
    summary["targets"] = targets;
    summary["report"] = report_json(result.report);
  } else {
    throw ArgumentError("unknown augmentation kind '" + kind + "' (direct | sequential | attributes)");
  }
  write_json(dir / "augment_report.json", summary);
  echo_run_config(dir, "augment", cfg);
  out << summary.dump(2) << '\n';
  return kOk;
}

int cmd_instructions(const RunConfig& cfg, std::ostream& out) {
  const auto data = load_data(cfg);
  const auto dir = output_dir(cfg);
  std::vector<PromptTask> tasks;
  for (const auto& name : cfg.instructions.tasks) tasks.push_back(parse_task(name));
  InstructionOptions options;
  options.noun = noun_for(data);
  options.list_size = cfg.instructions.list_size;
  const auto records = build_instruction_dataset(data.split, tasks, cfg.instructions.per_task,
                                                 cfg.instructions.seed, options);
  export_instructions(records, dir / "instructions.jsonl");

  json summary;
  summary["records"] = records.size();
  summary["per_task"] = cfg.instructions.per_task;
  json by_task = json::object();
  for (auto task : tasks) {
    by_task[std::string(task_name(task))] = std::count_if(
        records.begin(), records.end(), [&](const auto& r) { return r.task == task; });
  }
  summary["by_task"] = by_task;
  write_json(dir / "instructions_report.json", summary);
  echo_run_config(dir, "instructions", cfg);
  out << summary.dump(2) << '\n';
  return kOk;
}

/// Backbones trained (or loaded) once per command and shared across cells.
struct Backbones {
  std::optional<MFModel> mf;
  std::optional<MarkovSequentialModel> markov;
  std::optional<RatingModel> rating;
};

Backbones prepare_backbones(const RunConfig& cfg, const Data& data, LlmClient& client) {
  const auto& train = data.split.train;
  const auto& ev = cfg.evaluation;
  Backbones b;
  if (ev.task == "topk") {
    if (ev.backbone != "mf_bpr" && ev.backbone != "markov") {
      throw ArgumentError("unknown top-k backbone '" + ev.backbone + "' (mf_bpr | markov)");
    }
    const bool load_mf = ev.backbone == "mf_bpr" && !ev.model_file.empty();
    if (load_mf) {
      IdMaps ids;
      b.mf = load_mf_model(ev.model_file, &ids);
      require_same_ids(ids, train, ev.model_file);
    } else {
      std::vector<BprTriple> extra;
      if (ev.augment_training) {
        extra = augment_direct(train, client, cfg.augment.pairs_per_user, cfg.augment.seed,
                               {std::string(noun_for(data)), kDefaultHistoryLimit})
                    .triples;
      }
      b.mf = train_mf_bpr(train, cfg.mf_bpr, extra);
    }
    if (ev.backbone == "markov") {
      if (!ev.model_file.empty()) {
        IdMaps ids;
        b.markov = load_markov_model(ev.model_file, &ids);
        require_same_ids(ids, train, ev.model_file);
      } else {
        b.markov = train_markov_seq(train);
      }
    }
  } else if (ev.task == "rating") {
    if (!ev.model_file.empty()) {
      IdMaps ids;
      b.rating = load_rating_model(ev.model_file, &ids);
      require_same_ids(ids, train, ev.model_file);
    } else {
      b.rating = train_rating_mf(train, cfg.rating_mf);
    }
  } else {
    throw ArgumentError("unknown evaluation task '" + ev.task + "' (topk | rating)");
  }
  return b;
}

MetricReport evaluate_cell(const RunConfig& cfg, const Data& data, const Backbones& b,
                           LlmClient& client, const AggregationPolicy& policy) {
  const auto& ev = cfg.evaluation;
  EvalOptions options;
  options.candidates = ev.candidates;
  options.cutoffs = ev.cutoffs;
  options.fixed_alpha = ev.fixed_alpha;
  options.similar_user = ev.similar_user;
  options.model_prediction = ev.model_prediction;
  options.noun = noun_for(data);
  options.seed = ev.seed;
  // Everything that shapes the result except where it is written.
  auto context = to_json(cfg);
  context.erase("out");
  context.erase("aggregation");
  options.context = context.dump();

  if (ev.task == "topk") {
    const MFRecommender mf(*b.mf);
    std::optional<MarkovRecommender> markov;
    if (b.markov) markov.emplace(*b.markov);
    const Recommender* rec = markov ? static_cast<const Recommender*>(&*markov) : &mf;
    return evaluate_topk({rec, &*b.mf}, client, policy, data.split, options);
  }
  const RatingModelPredictor predictor(*b.rating);
  return evaluate_rating({&predictor, &b.rating->factors}, client, policy, data.split, options);
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const auto data = load_data(cfg);
  const auto dir = output_dir(cfg);
  auto client = make_client(cfg, data);
  const auto backbones = prepare_backbones(cfg, data, *client);
  const auto report = evaluate_cell(cfg, data, backbones, *client, cfg.aggregation);
  const auto text = report.to_json();
  write_text(dir / "report.json", text);
  echo_run_config(dir, "evaluate", cfg);
  out << text;
  return kOk;
}

constexpr double kAlphaGrid[] = {0.1, 0.3, 0.5, 0.7, 0.9};

bool lower_is_better(std::string_view metric) { return metric == "RMSE" || metric == "MAE"; }

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  if (cfg.evaluation.fixed_alpha) throw ArgumentError("sweep does not take a fixed alpha");
  const auto data = load_data(cfg);
  const auto dir = output_dir(cfg);
  fs::create_directories(dir / "sweep");
  auto client = make_client(cfg, data);
  const auto backbones = prepare_backbones(cfg, data, *client);

  struct Cell {
    double alpha1;
    double alpha2;
    MetricReport report;
  };
  std::vector<Cell> cells;
  for (double a1 : kAlphaGrid) {
    for (double a2 : kAlphaGrid) {
      auto policy = cfg.aggregation;
      policy.alpha1 = a1;
      policy.alpha2 = a2;
      auto report = evaluate_cell(cfg, data, backbones, *client, policy);
      write_text(dir / "sweep" / fmt::format("alpha1_{:.1f}_alpha2_{:.1f}.json", a1, a2),
                 report.to_json());
      cells.push_back({a1, a2, std::move(report)});
    }
  }

  json summary;
  summary["grid"] = kAlphaGrid;
  summary["baseline"] = json::object();
  for (const auto& [name, value] : cells.front().report.baseline) summary["baseline"][name] = value;
  json best = json::object();
  for (const auto& [name, _] : cells.front().report.metrics) {
    // Cells are visited with alpha1, then alpha2 ascending; only a strict
    // improvement replaces the incumbent.
    const Cell* winner = &cells.front();
    for (const auto& cell : cells) {
      const double v = cell.report.metric(name);
      const double w = winner->report.metric(name);
      if (lower_is_better(name) ? v < w : v > w) winner = &cell;
    }
    best[name] = {{"alpha1", winner->alpha1},
                  {"alpha2", winner->alpha2},
                  {"value", winner->report.metric(name)}};
  }
  summary["best"] = best;
  json list = json::array();
  for (const auto& cell : cells) {
    json entry;
    entry["alpha1"] = cell.alpha1;
    entry["alpha2"] = cell.alpha2;
    entry["metrics"] = json::object();
    for (const auto& [name, value] : cell.report.metrics) entry["metrics"][name] = value;
    list.push_back(std::move(entry));
  }
  summary["cells"] = std::move(list);
  write_json(dir / "sweep.json", summary);
  echo_run_config(dir, "sweep", cfg);
  out << json{{"best", best}}.dump(2) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// Command-line parsing

std::optional<std::string> find_config(const std::vector<std::string>& args) {
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) return args[k + 1];
    if (args[k].rfind("--config=", 0) == 0) return args[k].substr(9);
  }
  return std::nullopt;
}

/// Training flags apply to whichever model the command trains.
struct TrainFlags {
  std::size_t dimension = 0;
  double learning_rate = 0.0;
  double l2 = 0.0;
  std::size_t epochs = 0;
  std::size_t negatives = 0;
  std::uint64_t seed = 0;
  std::vector<CLI::Option*> options;

  void add(CLI::App* app) {
    options = {
        app->add_option("--dim", dimension, "Embedding dimension"),
        app->add_option("--lr", learning_rate, "SGD learning rate"),
        app->add_option("--l2", l2, "L2 regularisation"),
        app->add_option("--epochs", epochs, "Training epochs"),
        app->add_option("--negatives", negatives, "Negatives per positive (MF-BPR)"),
        app->add_option("--train-seed", seed, "Training RNG seed"),
    };
  }

  void apply(TrainConfig& c) const {
    if (options[0]->count()) c.dimension = dimension;
    if (options[1]->count()) c.learning_rate = learning_rate;
    if (options[2]->count()) c.l2_regularization = l2;
    if (options[3]->count()) c.epochs = epochs;
    if (options[4]->count()) c.negatives_per_positive = negatives;
    if (options[5]->count()) c.rng_seed = seed;
  }
};

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  if (auto path = find_config(args)) cfg = load_run_config(*path);

  CLI::App app{"Hybrid LLM and conventional recommender pipelines", "hybridrec"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_stamp());

  std::string config_path;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config; flags override its keys");
    sub->add_option("--data", cfg.dataset.path, "Dataset directory (or CSV file)");
    sub->add_option("--format", cfg.dataset.format, "ml100k | ml1m | bookcrossing | csv");
    sub->add_option("--k-core", cfg.dataset.k_core, "k-core filter (0 = off)");
    sub->add_option("--out", cfg.out, "Output directory");
  };
  auto add_llm = [&](CLI::App* sub) {
    sub->add_flag("--mock", cfg.llm.mock, "Use the deterministic mock oracle");
    sub->add_option("--endpoint", cfg.llm.endpoint, "Completion endpoint URL");
    sub->add_option("--llm-model", cfg.llm.model, "Model name sent to the endpoint");
    sub->add_option("--timeout-ms", cfg.llm.timeout_ms, "Per-request timeout");
    sub->add_option("--max-in-flight", cfg.llm.max_in_flight, "Concurrent requests");
    sub->add_option("--max-retries", cfg.llm.max_retries, "Retries per request");
    sub->add_option("--mock-seed", cfg.llm.mock_seed, "Mock noise seed");
    sub->add_option("--mock-noise", cfg.llm.mock_noise_rate, "Mock pair-flip rate");
    sub->add_option("--mock-attributes", cfg.llm.mock_attributes, "Attribute table for the mock");
  };
  auto add_policy = [&](CLI::App* sub) {
    sub->add_option("--alpha1", cfg.aggregation.alpha1, "Aggregation weight");
    sub->add_option("--alpha2", cfg.aggregation.alpha2, "Aggregation cut-off");
    sub->add_option("--position-constant", cfg.aggregation.position_constant, "Utility step C");
  };

  auto* ingest_cmd = app.add_subcommand("ingest", "Read a dataset, write corpus.csv and stats");
  add_common(ingest_cmd);
  auto* stats_cmd = app.add_subcommand("stats", "Print dataset statistics");
  add_common(stats_cmd);

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train a backbone on the train split");
  add_common(train_cmd);
  train_cmd->add_option("--model", cfg.model, "mf_bpr | rating_mf | markov");
  train_flags.add(train_cmd);

  auto* augment_cmd = app.add_subcommand("augment", "LLM data augmentation");
  add_common(augment_cmd);
  add_llm(augment_cmd);
  augment_cmd->add_option("--kind", cfg.augment.kind, "direct | sequential | attributes");
  augment_cmd->add_option("--pairs-per-user", cfg.augment.pairs_per_user, "Pairs per user");
  augment_cmd->add_option("--candidates-per-user", cfg.augment.candidates_per_user,
                          "Candidates per user");
  augment_cmd->add_option("--targets", cfg.augment.attribute_targets, "Attribute names")
      ->delimiter(',');
  augment_cmd->add_option("--seed", cfg.augment.seed, "Sampling seed");

  auto* instr_cmd = app.add_subcommand("instructions", "Build the instruction dataset");
  add_common(instr_cmd);
  instr_cmd->add_option("--tasks", cfg.instructions.tasks, "listwise,pointwise,rating,pair,next")
      ->delimiter(',');
  instr_cmd->add_option("--per-task", cfg.instructions.per_task, "Samples per task");
  instr_cmd->add_option("--list-size", cfg.instructions.list_size, "Candidates per list");
  instr_cmd->add_option("--seed", cfg.instructions.seed, "Sampling seed");

  double fixed_alpha = 0.0;
  std::vector<CLI::Option*> alpha_opts;
  TrainFlags eval_flags;
  auto add_eval = [&](CLI::App* sub) {
    add_common(sub);
    add_llm(sub);
    sub->add_option("--task", cfg.evaluation.task, "topk | rating");
    sub->add_option("--backbone", cfg.evaluation.backbone, "mf_bpr | markov");
    sub->add_option("--candidates", cfg.evaluation.candidates, "Reranked list size k'");
    sub->add_option("--cutoffs", cfg.evaluation.cutoffs, "HR/NDCG cutoffs")->delimiter(',');
    sub->add_option("--model-file", cfg.evaluation.model_file, "Load the backbone from a file");
    sub->add_option("--eval-seed", cfg.evaluation.seed, "Candidate presentation seed");
    sub->add_flag("--augment-training", cfg.evaluation.augment_training,
                  "Train MF-BPR with LLM-augmented triples");
    sub->add_option("--pairs-per-user", cfg.augment.pairs_per_user, "Pairs per user");
  };
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate the fused pipeline");
  add_eval(eval_cmd);
  add_policy(eval_cmd);
  alpha_opts.push_back(eval_cmd->add_option("--alpha", fixed_alpha, "Fixed weight for every user"));
  eval_flags.add(eval_cmd);
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid over alpha1 x alpha2");
  add_eval(sweep_cmd);
  sweep_cmd->add_option("--position-constant", cfg.aggregation.position_constant, "Utility step C");
  TrainFlags sweep_flags;
  sweep_flags.add(sweep_cmd);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  for (auto* opt : alpha_opts) {
    if (opt->count()) cfg.evaluation.fixed_alpha = fixed_alpha;
  }
  auto eval_target = [&]() -> TrainConfig& {
    return cfg.evaluation.task == "rating" ? cfg.rating_mf : cfg.mf_bpr;
  };

  if (*ingest_cmd) return cmd_ingest(cfg, out);
  if (*stats_cmd) return cmd_stats(cfg, out);
  if (*train_cmd) {
    train_flags.apply(cfg.model == "rating_mf" ? cfg.rating_mf : cfg.mf_bpr);
    return cmd_train(cfg, out);
  }
  if (*augment_cmd) return cmd_augment(cfg, out);
  if (*instr_cmd) return cmd_instructions(cfg, out);
  if (*eval_cmd) {
    eval_flags.apply(eval_target());
    return cmd_evaluate(cfg, out);
  }
  if (*sweep_cmd) {
    sweep_flags.apply(eval_target());
    return cmd_sweep(cfg, out);
  }
  return kUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const LlmError& e) {
    err << "error: " << e.what() << '\n';
    return kTransportError;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace hybridrec::cli
