#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybridrec/aggregate.hpp"
#include "hybridrec/recmodels.hpp"

namespace hybridrec::cli {

struct DatasetConfig {
  std::string path;
  std::string format = "ml100k";
  std::size_t k_core = 0;
};

struct LlmConfig {
  bool mock = false;
  std::string endpoint;
  std::string model = "llama-2-7b-rec";
  /// Bearer token. Echoed configs show it as "<redacted>".
  std::string api_key;
  int timeout_ms = 30000;
  int max_in_flight = 4;
  int max_retries = 3;
  int max_tokens = 256;
  std::uint64_t mock_seed = 0;
  double mock_noise_rate = 0.0;
  /// JSON file {item_key: {attribute: value}} served by the mock.
  std::string mock_attributes;
};

struct AugmentConfig {
  std::string kind = "direct";
  std::size_t pairs_per_user = 2;
  std::size_t candidates_per_user = 2;
  std::vector<std::string> attribute_targets;
  std::uint64_t seed = 7;
};

struct InstructionConfig {
  std::vector<std::string> tasks = {"listwise", "pointwise", "rating"};
  std::size_t per_task = 5000;
  std::size_t list_size = 5;
  std::uint64_t seed = 11;
};

struct EvalConfig {
  std::string task = "topk";
  std::string backbone = "mf_bpr";
  std::size_t candidates = 10;
  std::vector<std::size_t> cutoffs = {3, 5};
  std::optional<double> fixed_alpha;
  bool similar_user = true;
  bool model_prediction = true;
  /// Train the MF-BPR backbone on the LLM-augmented triples as well.
  bool augment_training = false;
  std::string model_file;
  std::uint64_t seed = 13;
};

struct RunConfig {
  DatasetConfig dataset;
  std::string model = "mf_bpr";
  TrainConfig mf_bpr;
  TrainConfig rating_mf = {16, 0.01, 0.05, 20, 1, 42, 0.1};
  AggregationPolicy aggregation;
  LlmConfig llm;
  AugmentConfig augment;
  InstructionConfig instructions;
  EvalConfig evaluation;
  std::string out;
};

/// Serialised config with secrets redacted.
nlohmann::ordered_json to_json(const RunConfig& config);
/// Keys absent from `doc` keep their defaults. Throws ArgumentError on type
/// mismatches.
RunConfig run_config_from_json(const nlohmann::ordered_json& doc);
RunConfig load_run_config(const std::string& path);

}  // namespace hybridrec::cli
