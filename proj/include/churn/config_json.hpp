#pragma once

#include <json.hpp>

#include "churn/architectures.hpp"
#include "churn/forest.hpp"
#include "churn/labeling.hpp"
#include "churn/nn.hpp"

// JSON forms of the sub-configs. Readers accept any subset of the keys,
// keep defaults for the rest and reject unknown keys.
namespace churn {

void to_json(nlohmann::json& j, const ChurnConfig& c);
void from_json(const nlohmann::json& j, ChurnConfig& c);
void to_json(nlohmann::json& j, const ForestConfig& c);
void from_json(const nlohmann::json& j, ForestConfig& c);
void to_json(nlohmann::json& j, const ModelDims& d);
void from_json(const nlohmann::json& j, ModelDims& d);

namespace nn {
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
}  // namespace nn

}  // namespace churn
