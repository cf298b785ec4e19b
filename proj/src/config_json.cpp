#include "churn/config_json.hpp"

#include <initializer_list>
#include <string>

#include "churn/errors.hpp"

namespace churn {
namespace {

void reject_unknown(const nlohmann::json& j, const char* what, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError(std::string("unknown key '") + k + "' in " + what);
  }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

void to_json(nlohmann::json& j, const ChurnConfig& c) {
  j = {{"observation_days", c.observation_days},
       {"churn_span_days", c.churn_span_days},
       {"prediction_offset_days", c.prediction_offset_days},
       {"sampling_spacing_days", c.sampling_spacing_days},
       {"sampling_count", c.sampling_count}};
}

void from_json(const nlohmann::json& j, ChurnConfig& c) {
  reject_unknown(j, "churn config", {"observation_days", "churn_span_days", "prediction_offset_days",
                                      "sampling_spacing_days", "sampling_count"});
  read(j, "observation_days", c.observation_days);
  read(j, "churn_span_days", c.churn_span_days);
  read(j, "prediction_offset_days", c.prediction_offset_days);
  read(j, "sampling_spacing_days", c.sampling_spacing_days);
  read(j, "sampling_count", c.sampling_count);
  c.validate();
}

void to_json(nlohmann::json& j, const ForestConfig& c) {
  j = {{"n_trees", c.n_trees},     {"max_features", c.max_features}, {"min_samples_split", c.min_samples_split},
       {"max_depth", c.max_depth}, {"bootstrap", c.bootstrap},       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ForestConfig& c) {
  reject_unknown(j, "forest config", {"n_trees", "max_features", "min_samples_split", "max_depth", "bootstrap", "seed"});
  read(j, "n_trees", c.n_trees);
  read(j, "max_features", c.max_features);
  read(j, "min_samples_split", c.min_samples_split);
  read(j, "max_depth", c.max_depth);
  read(j, "bootstrap", c.bootstrap);
  read(j, "seed", c.seed);
}

void to_json(nlohmann::json& j, const ModelDims& d) {
  j = {{"n_t", d.n_t}, {"n_f", d.n_f}, {"n_agg", d.n_agg}, {"units", d.units}, {"ann_hidden", d.ann_hidden}};
}

void from_json(const nlohmann::json& j, ModelDims& d) {
  reject_unknown(j, "model dims", {"n_t", "n_f", "n_agg", "units", "ann_hidden"});
  read(j, "n_t", d.n_t);
  read(j, "n_f", d.n_f);
  read(j, "n_agg", d.n_agg);
  read(j, "units", d.units);
  read(j, "ann_hidden", d.ann_hidden);
}

namespace nn {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"learning_rate", c.learning_rate}, {"beta1", c.beta1},
       {"beta2", c.beta2},                 {"epsilon", c.epsilon},
       {"batch_size", c.batch_size},       {"max_epochs", c.max_epochs},
       {"patience", c.patience},           {"validation_fraction", c.validation_fraction},
       {"seed", c.seed},                   {"clip_norm", c.clip_norm}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  reject_unknown(j, "train config", {"learning_rate", "beta1", "beta2", "epsilon", "batch_size", "max_epochs",
                                      "patience", "validation_fraction", "seed", "clip_norm"});
  read(j, "learning_rate", c.learning_rate);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "epsilon", c.epsilon);
  read(j, "batch_size", c.batch_size);
  read(j, "max_epochs", c.max_epochs);
  read(j, "patience", c.patience);
  read(j, "validation_fraction", c.validation_fraction);
  read(j, "seed", c.seed);
  read(j, "clip_norm", c.clip_norm);
  c.validate();
}

}  // namespace nn
}  // namespace churn
