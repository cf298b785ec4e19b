#include "churn/dataset_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>

#include "churn/errors.hpp"

namespace churn {
namespace {

constexpr char kMagic[8] = {'C', 'H', 'U', 'R', 'N', 'D', 'S', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("dataset file is truncated");
  return v;
}

std::filesystem::path sidecar_path(const std::filesystem::path& p) { return p.string() + ".json"; }

template <std::size_t N>
nlohmann::ordered_json array_json(const std::array<double, N>& a) {
  return nlohmann::ordered_json(std::vector<double>(a.begin(), a.end()));
}

template <std::size_t N>
nlohmann::ordered_json array_json(const std::array<bool, N>& a) {
  return nlohmann::ordered_json(std::vector<bool>(a.begin(), a.end()));
}

template <typename T, std::size_t N>
void read_array(const nlohmann::json& j, const char* key, std::array<T, N>& out) {
  const auto v = j.at(key).get<std::vector<T>>();
  if (v.size() != N) throw DataError(std::string("scaler field '") + key + "' has the wrong length");
  std::copy(v.begin(), v.end(), out.begin());
}

}  // namespace

nlohmann::ordered_json scaler_to_json(const Scaler& s) {
  nlohmann::ordered_json j;
  j["temporal_mean"] = array_json(s.temporal_mean);
  j["temporal_std"] = array_json(s.temporal_std);
  j["temporal_constant"] = array_json(s.temporal_constant);
  j["aggregate_mean"] = array_json(s.aggregate_mean);
  j["aggregate_std"] = array_json(s.aggregate_std);
  j["aggregate_constant"] = array_json(s.aggregate_constant);
  return j;
}

Scaler scaler_from_json(const nlohmann::json& j) {
  Scaler s;
  try {
    read_array(j, "temporal_mean", s.temporal_mean);
    read_array(j, "temporal_std", s.temporal_std);
    read_array(j, "temporal_constant", s.temporal_constant);
    read_array(j, "aggregate_mean", s.aggregate_mean);
    read_array(j, "aggregate_std", s.aggregate_std);
    read_array(j, "aggregate_constant", s.aggregate_constant);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed scaler: ") + e.what());
  }
  return s;
}

std::vector<std::string> dataset_column_names(int days) {
  auto names = flattened_feature_names(days);
  for (auto n : kAggregateFeatureNames) names.emplace_back(n);
  return names;
}

void write_dataset(const Dataset& data, const std::filesystem::path& path, const std::string& data_hash) {
  const std::size_t n = data.size();
  const std::size_t tw = data.temporal_width();
  if (data.temporal.size() != n * tw || data.aggregate.size() != n * kAggregateFeatures ||
      data.player_ids.size() != n || data.prediction_dates.size() != n || data.converted.size() != n)
    throw ContractError("write_dataset: inconsistent dataset columns");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put(out, kVersion);
  put(out, static_cast<std::uint64_t>(n));
  put(out, static_cast<std::int32_t>(data.days));
  put(out, static_cast<std::int32_t>(kTemporalFeatures));
  put(out, static_cast<std::int32_t>(kAggregateFeatures));
  for (const auto& id : data.player_ids) {
    put(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  for (int d : data.prediction_dates) put(out, static_cast<std::int32_t>(d));
  for (int y : data.labels) put(out, static_cast<std::int32_t>(y));
  out.write(reinterpret_cast<const char*>(data.converted.data()), static_cast<std::streamsize>(n));
  for (std::size_t c = 0; c < tw; ++c)
    for (std::size_t i = 0; i < n; ++i) put(out, data.temporal[i * tw + c]);
  for (std::size_t c = 0; c < kAggregateFeatures; ++c)
    for (std::size_t i = 0; i < n; ++i) put(out, data.aggregate[i * kAggregateFeatures + c]);
  if (!out) throw DataError("failed writing " + path.string());

  nlohmann::ordered_json meta;
  meta["format"] = "churn-dataset";
  meta["version"] = kVersion;
  meta["data_hash"] = data_hash;
  meta["rows"] = n;
  meta["days"] = data.days;
  meta["n_temporal_features"] = kTemporalFeatures;
  meta["n_aggregate_features"] = kAggregateFeatures;
  meta["row_columns"] = {"player_id", "prediction_date", "label", "converted"};
  meta["columns"] = dataset_column_names(data.days);
  if (n >= 2) meta["scaler_all_rows"] = scaler_to_json(fit_scaler(data));
  std::ofstream side(sidecar_path(path));
  if (!side) throw DataError("cannot write " + sidecar_path(path).string());
  side << meta.dump(2) << '\n';
}

LoadedDataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read dataset " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw DataError(path.string() + " is not a dataset file");
  if (get<std::uint32_t>(in) != kVersion) throw DataError(path.string() + ": unsupported dataset version");
  const auto n = get<std::uint64_t>(in);
  LoadedDataset out;
  Dataset& d = out.data;
  d.days = get<std::int32_t>(in);
  if (get<std::int32_t>(in) != kTemporalFeatures || get<std::int32_t>(in) != kAggregateFeatures || d.days < 1)
    throw DataError(path.string() + ": unexpected feature dimensions");
  const std::size_t tw = d.temporal_width();
  d.player_ids.resize(n);
  for (auto& id : d.player_ids) {
    const auto len = get<std::uint32_t>(in);
    if (len > 4096) throw DataError(path.string() + ": corrupt player id");
    id.resize(len);
    if (!in.read(id.data(), len)) throw DataError("dataset file is truncated");
  }
  d.prediction_dates.resize(n);
  for (auto& v : d.prediction_dates) v = get<std::int32_t>(in);
  d.labels.resize(n);
  for (auto& v : d.labels) v = get<std::int32_t>(in);
  d.converted.resize(n);
  if (!in.read(reinterpret_cast<char*>(d.converted.data()), static_cast<std::streamsize>(n)))
    throw DataError("dataset file is truncated");
  d.temporal.resize(n * tw);
  for (std::size_t c = 0; c < tw; ++c)
    for (std::size_t i = 0; i < n; ++i) d.temporal[i * tw + c] = get<double>(in);
  d.aggregate.resize(n * kAggregateFeatures);
  for (std::size_t c = 0; c < kAggregateFeatures; ++c)
    for (std::size_t i = 0; i < n; ++i) d.aggregate[i * kAggregateFeatures + c] = get<double>(in);
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes");

  std::ifstream side(sidecar_path(path));
  if (!side) throw DataError("missing sidecar " + sidecar_path(path).string());
  try {
    const auto meta = nlohmann::json::parse(side);
    if (meta.at("rows").get<std::uint64_t>() != n || meta.at("days").get<int>() != d.days)
      throw DataError(path.string() + ": sidecar does not match the binary file");
    out.data_hash = meta.at("data_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed sidecar " + sidecar_path(path).string() + ": " + e.what());
  }
  return out;
}

void export_dataset_csv(const Dataset& data, std::ostream& out) {
  out << "player_id,prediction_date,label,converted";
  for (const auto& name : dataset_column_names(data.days)) out << ',' << name;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.player_ids[i] << ',' << data.prediction_dates[i] << ','
        << (data.labels[i] ? "churner" : "nonchurner") << ',' << int(data.converted[i]);
    for (double v : data.temporal_row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    for (double v : data.aggregate_row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace churn
