#pragma once

#include <filesystem>
#include <string>

#include "churn/architectures.hpp"

namespace churn {

struct SavedModel {
  TrainedModel model;
  nn::TrainConfig train;
  ForestConfig forest;
  std::string config_hash;
};

/// Magic, format version, a length-prefixed JSON header (architecture,
/// dimensions, configs, seed, scaler, config hash), then raw little-endian
/// doubles for network parameters or the forest's node arrays.
void save_model(const SavedModel& saved, const std::filesystem::path& path);
SavedModel load_model(const std::filesystem::path& path);

}  // namespace churn
