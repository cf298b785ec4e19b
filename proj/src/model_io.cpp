#include "churn/model_io.hpp"

#include <cstring>
#include <fstream>

#include "churn/config_json.hpp"
#include "churn/dataset_io.hpp"
#include "churn/errors.hpp"

namespace churn {
namespace {

constexpr char kMagic[8] = {'C', 'H', 'U', 'R', 'N', 'M', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("model file is truncated");
  return v;
}

}  // namespace

void save_model(const SavedModel& saved, const std::filesystem::path& path) {
  const TrainedModel& m = saved.model;
  nlohmann::ordered_json header;
  header["format"] = "churn-model";
  header["version"] = kVersion;
  header["architecture"] = std::string(cli_name(m.id));
  header["config_hash"] = saved.config_hash;
  nlohmann::json dims = m.dims, train = saved.train, forest = saved.forest;
  header["dims"] = dims;
  header["train"] = train;
  header["forest"] = forest;
  header["seed"] = m.id == ArchitectureId::BaselineRF ? saved.forest.seed : saved.train.seed;
  if (m.scaler) header["scaler"] = scaler_to_json(*m.scaler);
  if (m.network) {
    header["parameter_count"] = m.network->parameter_count();
  } else if (m.forest) {
    header["n_features"] = m.forest->n_features();
    header["n_trees"] = m.forest->trees().size();
  } else {
    throw ContractError("save_model: model is not trained");
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (m.network) {
    auto p = m.network->parameters();
    out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size_bytes()));
  } else {
    for (std::size_t t = 0; t < m.forest->trees().size(); ++t) {
      const auto& tree = m.forest->trees()[t];
      put(out, static_cast<std::uint64_t>(tree.nodes.size()));
      for (const auto& n : tree.nodes) {
        put(out, static_cast<std::int32_t>(n.feature));
        put(out, n.threshold);
        put(out, static_cast<std::int32_t>(n.left));
        put(out, static_cast<std::int32_t>(n.right));
        put(out, n.value);
        put(out, n.weight);
      }
      const auto& imp = m.forest->tree_importances()[t];
      out.write(reinterpret_cast<const char*>(imp.data()), static_cast<std::streamsize>(imp.size() * sizeof(double)));
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

SavedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read model " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw DataError(path.string() + " is not a model file");
  if (get<std::uint32_t>(in) != kVersion) throw DataError(path.string() + ": unsupported model version");
  const auto len = get<std::uint32_t>(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), len)) throw DataError("model file is truncated");

  SavedModel saved;
  TrainedModel& m = saved.model;
  std::size_t count = 0, n_features = 0, n_trees = 0;
  try {
    const auto header = nlohmann::json::parse(text);
    const auto arch = parse_architecture(header.at("architecture").get<std::string>());
    if (!arch) throw DataError(path.string() + ": unknown architecture");
    m.id = *arch;
    m.dims = header.at("dims").get<ModelDims>();
    saved.train = header.at("train").get<nn::TrainConfig>();
    saved.forest = header.at("forest").get<ForestConfig>();
    saved.config_hash = header.at("config_hash").get<std::string>();
    if (header.contains("scaler")) m.scaler = scaler_from_json(header.at("scaler"));
    if (m.id == ArchitectureId::BaselineRF) {
      n_features = header.at("n_features").get<std::size_t>();
      n_trees = header.at("n_trees").get<std::size_t>();
    } else {
      count = header.at("parameter_count").get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed model header in " + path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("invalid config in model header " + path.string() + ": " + e.what());
  }

  if (m.id != ArchitectureId::BaselineRF) {
    if (count != expected_parameter_count(m.id, m.dims)) throw DataError(path.string() + ": parameter count mismatch");
    std::vector<double> params(count);
    if (!in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(count * sizeof(double))))
      throw DataError("model file is truncated");
    m.network = NeuralModel::from_parameters(m.id, m.dims, std::move(params));
    if (!m.scaler) throw DataError(path.string() + ": neural model without a scaler");
  } else {
    std::vector<DecisionTree> trees(n_trees);
    std::vector<std::vector<double>> importances(n_trees, std::vector<double>(n_features));
    for (std::size_t t = 0; t < n_trees; ++t) {
      const auto nodes = get<std::uint64_t>(in);
      if (nodes > (1ULL << 32)) throw DataError(path.string() + ": corrupt tree");
      trees[t].nodes.resize(nodes);
      for (auto& n : trees[t].nodes) {
        n.feature = get<std::int32_t>(in);
        n.threshold = get<double>(in);
        n.left = get<std::int32_t>(in);
        n.right = get<std::int32_t>(in);
        n.value = get<double>(in);
        n.weight = get<double>(in);
        if (n.feature >= static_cast<int>(n_features) ||
            (!n.is_leaf() && (n.left < 0 || n.right < 0 || n.left >= static_cast<int>(nodes) ||
                              n.right >= static_cast<int>(nodes))))
          throw DataError(path.string() + ": corrupt tree node");
      }
      if (!in.read(reinterpret_cast<char*>(importances[t].data()),
                   static_cast<std::streamsize>(n_features * sizeof(double))))
        throw DataError("model file is truncated");
    }
    m.forest = RandomForest::from_parts(n_features, std::move(trees), std::move(importances));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes");
  return saved;
}

}  // namespace churn
