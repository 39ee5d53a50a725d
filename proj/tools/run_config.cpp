#include "run_config.hpp"

#include <fstream>
#include <set>
#include <type_traits>

#include "hybridrec/errors.hpp"

namespace hybridrec::cli {

using json = nlohmann::ordered_json;

namespace {

// One fields_of() per section; write() and read() both walk it.

template <class F>
void fields_of(DatasetConfig& c, F&& f) {
  f("path", c.path);
  f("format", c.format);
  f("k_core", c.k_core);
}

template <class F>
void fields_of(TrainConfig& c, F&& f) {
  f("dimension", c.dimension);
  f("learning_rate", c.learning_rate);
  f("l2_regularization", c.l2_regularization);
  f("epochs", c.epochs);
  f("negatives_per_positive", c.negatives_per_positive);
  f("rng_seed", c.rng_seed);
  f("init_std", c.init_std);
}

template <class F>
void fields_of(AggregationPolicy& c, F&& f) {
  f("alpha1", c.alpha1);
  f("alpha2", c.alpha2);
  f("position_constant", c.position_constant);
}

template <class F>
void fields_of(LlmConfig& c, F&& f) {
  f("mock", c.mock);
  f("endpoint", c.endpoint);
  f("model", c.model);
  f("api_key", c.api_key);
  f("timeout_ms", c.timeout_ms);
  f("max_in_flight", c.max_in_flight);
  f("max_retries", c.max_retries);
  f("max_tokens", c.max_tokens);
  f("mock_seed", c.mock_seed);
  f("mock_noise_rate", c.mock_noise_rate);
  f("mock_attributes", c.mock_attributes);
}

template <class F>
void fields_of(AugmentConfig& c, F&& f) {
  f("kind", c.kind);
  f("pairs_per_user", c.pairs_per_user);
  f("candidates_per_user", c.candidates_per_user);
  f("attribute_targets", c.attribute_targets);
  f("seed", c.seed);
}

template <class F>
void fields_of(InstructionConfig& c, F&& f) {
  f("tasks", c.tasks);
  f("per_task", c.per_task);
  f("list_size", c.list_size);
  f("seed", c.seed);
}

template <class F>
void fields_of(EvalConfig& c, F&& f) {
  f("task", c.task);
  f("backbone", c.backbone);
  f("candidates", c.candidates);
  f("cutoffs", c.cutoffs);
  f("fixed_alpha", c.fixed_alpha);
  f("similar_user", c.similar_user);
  f("model_prediction", c.model_prediction);
  f("augment_training", c.augment_training);
  f("model_file", c.model_file);
  f("seed", c.seed);
}

template <class F>
void fields_of(RunConfig& c, F&& f) {
  f("dataset", c.dataset);
  f("model", c.model);
  f("mf_bpr", c.mf_bpr);
  f("rating_mf", c.rating_mf);
  f("aggregation", c.aggregation);
  f("llm", c.llm);
  f("augment", c.augment);
  f("instructions", c.instructions);
  f("evaluation", c.evaluation);
  f("out", c.out);
}

template <class T>
concept Section = requires(T& t) { fields_of(t, [](const char*, auto&) {}); };

template <class T>
json write(const T& value) {
  if constexpr (Section<T>) {
    json out = json::object();
    fields_of(const_cast<T&>(value), [&](const char* key, auto& field) { out[key] = write(field); });
    return out;
  } else if constexpr (requires { value.has_value(); *value; }) {
    return value ? write(*value) : json(nullptr);
  } else {
    return json(value);
  }
}

template <class T>
void read(const json& doc, const std::string& where, T& target) {
  if constexpr (Section<T>) {
    if (!doc.is_object()) throw ArgumentError("config: '" + where + "' must be an object");
    std::set<std::string> known;
    fields_of(target, [&](const char* key, auto& field) {
      known.insert(key);
      if (auto it = doc.find(key); it != doc.end()) read(*it, where + "." + key, field);
    });
    for (const auto& [key, _] : doc.items()) {
      if (!known.contains(key)) throw ArgumentError("config: unknown key '" + where + "." + key + "'");
    }
  } else if constexpr (requires { target.has_value(); target.reset(); }) {
    if (doc.is_null()) {
      target.reset();
    } else {
      typename T::value_type v{};
      read(doc, where, v);
      target = v;
    }
  } else {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (doc.is_number_integer() && doc.template get<std::int64_t>() < 0) {
        throw ArgumentError("config: '" + where + "' must be non-negative");
      }
    }
    try {
      target = doc.template get<T>();
    } catch (const json::exception&) {
      throw ArgumentError("config: '" + where + "' has the wrong type");
    }
  }
}

}  // namespace

json to_json(const RunConfig& config) {
  auto doc = write(config);
  if (!config.llm.api_key.empty()) doc["llm"]["api_key"] = "<redacted>";
  return doc;
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig config;
  read(doc, "config", config);
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  const auto doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ArgumentError("config " + path + " is not valid JSON");
  return run_config_from_json(doc);
}

}  // namespace hybridrec::cli
