#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

#include "churn/features.hpp"

namespace churn {

nlohmann::ordered_json scaler_to_json(const Scaler& s);
Scaler scaler_from_json(const nlohmann::json& j);

/// Column names in storage order: flattened temporal columns, then aggregates.
std::vector<std::string> dataset_column_names(int days);

/// Writes `path` (binary columns) and `path` + ".json" (sidecar with column
/// names, shapes, data hash and a scaler fitted on all rows for inspection).
void write_dataset(const Dataset& data, const std::filesystem::path& path, const std::string& data_hash);

struct LoadedDataset {
  Dataset data;
  std::string data_hash;
};

/// Throws DataError on a missing, truncated or inconsistent file.
LoadedDataset read_dataset(const std::filesystem::path& path);

/// player_id,prediction_date,label,converted, then one column per feature.
void export_dataset_csv(const Dataset& data, std::ostream& out);

}  // namespace churn
