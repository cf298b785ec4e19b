#include "churn/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "churn/config_json.hpp"
#include "churn/dataset_io.hpp"
#include "churn/errors.hpp"
#include "churn/model_io.hpp"
#include "churn/rng.hpp"

namespace churn {
namespace fs = std::filesystem;

namespace {

constexpr const char* kTopKeys[] = {"seed",      "data",   "synth",        "churn",          "lookback_days",
                                    "model",     "train",  "forest",       "architectures",  "folds",
                                    "cohort",    "sigma_mode", "lstm_agg_joint", "roc_svg"};
constexpr const char* kDataKeys[] = {"source", "event_log", "profiles", "horizon", "first_sampling_date"};

template <std::size_t N>
void reject_unknown(const nlohmann::json& j, const char* what, const char* const (&keys)[N]) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError("unknown key '" + k + "' in " + what);
  }
}

nlohmann::json without_seed(const nlohmann::json& section, const char* what) {
  if (section.contains("seed"))
    throw ConfigError(std::string("'seed' is not allowed in ") + what + "; sub-seeds derive from the master seed");
  return section;
}

template <typename T>
T field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot read " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

fs::path meta_path(const fs::path& file) { return file.string() + ".meta.json"; }

EventLog load_log(const ExperimentConfig& c, const fs::path& out) {
  const ExperimentPaths paths{out};
  fs::path file = c.source == "synth" ? paths.events() : c.event_log;
  if (c.source == "synth") require_data_hash(file, c);
  auto result = ingest(file, log_format_for(file));
  if (result.rejected > 0)
    std::fprintf(stderr, "warning: %zu malformed rows in %s were skipped (first at line %zu: %s)\n", result.rejected,
                 file.string().c_str(), result.rejects.front().line, result.rejects.front().reason.c_str());
  return std::move(result.log);
}

std::vector<PlayerProfile> load_profiles(const ExperimentConfig& c, const fs::path& out) {
  const ExperimentPaths paths{out};
  if (c.source == "synth") {
    require_data_hash(paths.profiles(), c);
    return read_profiles(paths.profiles());
  }
  return read_profiles(c.profiles);
}

Dataset load_dataset(const ExperimentConfig& c, const fs::path& out) {
  auto loaded = read_dataset(ExperimentPaths{out}.dataset());
  if (loaded.data_hash != data_hash(c))
    throw DataError("dataset.bin was built with data config " + loaded.data_hash + ", not " + data_hash(c) +
                    "; rerun featurize");
  return std::move(loaded.data);
}

std::vector<RocPoint> read_roc_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot read " + p.string());
  std::string line;
  std::getline(in, line);
  if (line != "fpr,tpr,threshold") throw DataError(p.string() + " is not a ROC CSV");
  std::vector<RocPoint> pts;
  while (std::getline(in, line)) {
    RocPoint pt;
    std::istringstream row(line);
    std::string a, b, t;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, t))
      throw DataError("malformed row in " + p.string());
    pt.fpr = std::stod(a);
    pt.tpr = std::stod(b);
    pt.threshold = t == "inf" ? std::numeric_limits<double>::infinity() : std::stod(t);
    pts.push_back(pt);
  }
  return pts;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (source != "synth" && source != "file") throw ConfigError("data.source must be 'synth' or 'file'");
  if (source == "file" && (event_log.empty() || profiles.empty()))
    throw ConfigError("data.source 'file' needs data.event_log and data.profiles");
  if (horizon < 0) throw ConfigError("data.horizon must be >= 0");
  synth.validate();
  churn.validate();
  train.validate();
  forest.validate(static_cast<std::size_t>(dims.n_t) * static_cast<std::size_t>(dims.n_f));
  if (lookback_days < 1) throw ConfigError("lookback_days must be >= 1");
  if (dims.n_t != churn.observation_days) throw ConfigError("model.n_t must equal churn.observation_days");
  if (dims.n_f != kTemporalFeatures || dims.n_agg != kAggregateFeatures)
    throw ConfigError("model.n_f and model.n_agg are fixed by the feature set (10 and 36)");
  if (dims.units < 1 || dims.ann_hidden < 1) throw ConfigError("model sizes must be >= 1");
  if (architectures.empty()) throw ConfigError("architectures must not be empty");
  if (folds < 2) throw ConfigError("folds must be >= 2");
}

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  nlohmann::ordered_json data;
  data["source"] = c.source;
  data["event_log"] = c.event_log.generic_string();
  data["profiles"] = c.profiles.generic_string();
  data["horizon"] = c.horizon;
  data["first_sampling_date"] = c.first_sampling_date;
  j["data"] = data;
  nlohmann::json synth = c.synth, train = c.train, forest = c.forest;
  synth.erase("seed");
  train.erase("seed");
  forest.erase("seed");
  j["synth"] = synth;
  j["churn"] = nlohmann::json(c.churn);
  j["lookback_days"] = c.lookback_days;
  j["model"] = nlohmann::json(c.dims);
  j["train"] = train;
  j["forest"] = forest;
  auto archs = nlohmann::ordered_json::array();
  for (auto a : c.architectures) archs.push_back(std::string(cli_name(a)));
  j["architectures"] = archs;
  j["folds"] = c.folds;
  j["cohort"] = c.cohort_converted ? "converted" : "all";
  j["sigma_mode"] = std::string(to_string(c.sigma_mode));
  j["lstm_agg_joint"] = c.lstm_agg_joint;
  j["roc_svg"] = c.roc_svg;
  return j;
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  reject_unknown(j, "experiment config", kTopKeys);
  ExperimentConfig c;
  c.seed = field<std::uint64_t>(j, "seed", c.seed);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, "data", kDataKeys);
    c.source = field<std::string>(d, "source", c.source);
    c.event_log = field<std::string>(d, "event_log", "");
    c.profiles = field<std::string>(d, "profiles", "");
    c.horizon = field<int>(d, "horizon", c.horizon);
    c.first_sampling_date = field<int>(d, "first_sampling_date", c.first_sampling_date);
  }
  if (j.contains("synth")) from_json(without_seed(j.at("synth"), "synth"), c.synth);
  if (j.contains("churn")) from_json(j.at("churn"), c.churn);
  c.lookback_days = field<int>(j, "lookback_days", c.lookback_days);
  if (j.contains("model")) from_json(j.at("model"), c.dims);
  if (j.contains("train")) nn::from_json(without_seed(j.at("train"), "train"), c.train);
  if (j.contains("forest")) from_json(without_seed(j.at("forest"), "forest"), c.forest);
  if (j.contains("architectures")) {
    c.architectures.clear();
    for (const auto& name : field<std::vector<std::string>>(j, "architectures", {})) {
      auto a = parse_architecture(name);
      if (!a) throw ConfigError("unknown architecture '" + name + "'");
      c.architectures.push_back(*a);
    }
  }
  c.folds = field<int>(j, "folds", c.folds);
  const auto cohort = field<std::string>(j, "cohort", "all");
  if (cohort != "all" && cohort != "converted") throw ConfigError("cohort must be 'all' or 'converted'");
  c.cohort_converted = cohort == "converted";
  c.sigma_mode = parse_sigma_mode(field<std::string>(j, "sigma_mode", "standard_error"));
  c.lstm_agg_joint = field<bool>(j, "lstm_agg_joint", c.lstm_agg_joint);
  c.roc_svg = field<bool>(j, "roc_svg", c.roc_svg);
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

std::string config_hash(const ExperimentConfig& c) { return hex64(hash_string(to_json(c).dump())); }

std::string data_hash(const ExperimentConfig& c) {
  const auto full = to_json(c);
  nlohmann::ordered_json j;
  for (const char* key : {"seed", "data", "synth", "churn", "lookback_days"}) j[key] = full.at(key);
  return hex64(hash_string(j.dump()));
}

SynthConfig resolved_synth(const ExperimentConfig& c) {
  SynthConfig s = c.synth;
  s.seed = derive_seed(c.seed, "synth");
  return s;
}

ArchitectureOptions resolved_options(const ExperimentConfig& c) {
  ArchitectureOptions o;
  o.dims = c.dims;
  o.train = c.train;
  o.train.seed = derive_seed(c.seed, "train");
  o.forest = c.forest;
  o.forest.seed = derive_seed(c.seed, "forest");
  o.lstm_agg_joint = c.lstm_agg_joint;
  return o;
}

std::uint64_t fold_seed(const ExperimentConfig& c) { return derive_seed(c.seed, "folds"); }

int resolved_horizon(const ExperimentConfig& c, const EventLog& log) {
  if (c.horizon > 0) return c.horizon;
  return c.source == "synth" ? c.synth.day_span : log.day_end();
}

std::vector<int> resolved_sampling_dates(const ExperimentConfig& c, int horizon) {
  const auto& k = c.churn;
  int first = c.first_sampling_date;
  if (first < 0) first = horizon - k.label_lag() - k.sampling_spacing_days * (k.sampling_count - 1) - 1;
  if (first < k.observation_days)
    throw ConfigError("the data span is too short for " + std::to_string(k.sampling_count) + " sampling dates");
  auto dates = sampling_dates(first, k);
  if (dates.back() + k.label_lag() > horizon)
    throw ConfigError("the last sampling date " + std::to_string(dates.back()) + " leaves labels censored by horizon " +
                      std::to_string(horizon));
  return dates;
}

fs::path ExperimentPaths::model(ArchitectureId a) const { return dir / ("model_" + std::string(cli_name(a)) + ".bin"); }
fs::path ExperimentPaths::metrics(ArchitectureId a) const {
  return dir / ("metrics_" + std::string(cli_name(a)) + ".json");
}
fs::path ExperimentPaths::roc(ArchitectureId a) const { return dir / ("roc_" + std::string(cli_name(a)) + ".csv"); }

void write_meta(const fs::path& file, const ExperimentConfig& c, const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json j;
  j["file"] = file.filename().string();
  j["config_hash"] = config_hash(c);
  j["data_hash"] = data_hash(c);
  if (extra.is_object())
    for (const auto& [k, v] : extra.items()) j[k] = v;
  write_text(meta_path(file), j.dump(2) + "\n");
}

void require_data_hash(const fs::path& file, const ExperimentConfig& c) {
  const auto hash = data_hash(c);
  const fs::path meta = meta_path(file);
  if (!fs::exists(file)) throw DataError("missing input " + file.string());
  if (!fs::exists(meta)) throw DataError("missing " + meta.string() + "; cannot verify which config produced it");
  const auto j = read_json(meta);
  const auto found = j.value("data_hash", std::string());
  if (found != hash)
    throw DataError(file.string() + " was produced by data config " + found + ", not " + hash +
                    "; rerun the upstream step");
}

SynthSummary cmd_synth(const ExperimentConfig& c, const fs::path& out) {
  if (c.source != "synth") throw ConfigError("synth needs data.source = 'synth'");
  fs::create_directories(out);
  const auto result = generate(resolved_synth(c));
  const ExperimentPaths paths{out};
  export_synth(result.log, result.profiles, out, LogFormat::Csv);
  write_meta(paths.events(), c, {{"events", result.log.size()}});
  write_meta(paths.profiles(), c, {{"players", result.profiles.size()}});
  return {result.profiles.size(), result.log.size()};
}

LabelSummary cmd_label(const ExperimentConfig& c, const fs::path& out) {
  fs::create_directories(out);
  const EventLog log = load_log(c, out);
  LabelSummary s;
  s.horizon = resolved_horizon(c, log);
  s.dates = resolved_sampling_dates(c, s.horizon);
  const auto samples = build_samples(log, s.dates, c.churn, s.horizon);
  const ExperimentPaths paths{out};
  write_manifest(samples, paths.samples());
  s.eligible = samples.size();
  for (const auto& r : samples) s.churners += r.label == ChurnLabel::Churner;
  write_meta(paths.samples(), c,
             {{"horizon", s.horizon}, {"sampling_dates", s.dates}, {"eligible", s.eligible}, {"churners", s.churners}});
  return s;
}

std::size_t cmd_featurize(const ExperimentConfig& c, const fs::path& out) {
  const ExperimentPaths paths{out};
  require_data_hash(paths.samples(), c);
  const EventLog log = load_log(c, out);
  const auto profiles = load_profiles(c, out);
  const auto samples = read_manifest(paths.samples());
  const Dataset data = featurize(log, profiles, samples, c.churn.observation_days, c.lookback_days);
  write_dataset(data, paths.dataset(), data_hash(c));
  return data.size();
}

fs::path cmd_train(const ExperimentConfig& c, const fs::path& out, ArchitectureId arch) {
  const Dataset data = load_dataset(c, out);
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const ArchitectureOptions opts = resolved_options(c);
  SavedModel saved;
  saved.model = train_architecture(arch, data, rows, opts);
  saved.train = opts.train;
  saved.forest = opts.forest;
  saved.config_hash = config_hash(c);
  const fs::path path = ExperimentPaths{out}.model(arch);
  save_model(saved, path);
  return path;
}

std::vector<MetricSummary> cmd_eval(const ExperimentConfig& c, const fs::path& out) {
  const Dataset data = load_dataset(c, out);
  const ExperimentPaths paths{out};
  const auto hash = config_hash(c);
  const FoldPlan plan = stratified_kfold(data.labels, c.folds, fold_seed(c));
  ArchitectureOptions opts = resolved_options(c);
  Stage1Cache cache;
  opts.stage1_cache = &cache;
  const CohortFilter cohort = c.cohort_converted ? CohortFilter(converted_cohort) : CohortFilter();
  std::vector<MetricSummary> summaries;
  std::vector<RocSeries> curves;
  for (auto arch : c.architectures) {
    const CvResult cv = run_cv(data, arch, opts, plan, cohort, c.sigma_mode);
    nlohmann::ordered_json j;
    j["config_hash"] = hash;
    j.update(to_json(cv.summary));
    write_text(paths.metrics(arch), j.dump(2) + "\n");
    try {
      auto curve = roc_curve(cv.oof_scores, cv.oof_labels);
      std::ofstream roc(paths.roc(arch), std::ios::binary);
      write_roc_csv(curve, roc);
      roc.close();
      write_meta(paths.roc(arch), c);
      curves.push_back({std::string(display_name(arch)), std::move(curve)});
    } catch (const ContractError&) {
      // every evaluated label in one class: no curve to draw
    }
    summaries.push_back(cv.summary);
  }
  write_text(paths.results_table(), format_results_table(summaries));
  if (c.roc_svg && !curves.empty()) write_roc_svg(curves, paths.roc_svg());
  return summaries;
}

std::vector<RankedFeature> cmd_importance(const ExperimentConfig& c, const fs::path& out) {
  const Dataset data = load_dataset(c, out);
  const ArchitectureOptions opts = resolved_options(c);
  std::vector<int> labels(data.labels.begin(), data.labels.end());
  const auto forest = RandomForest::fit(data.temporal, data.temporal_width(), labels, opts.forest);
  const auto ranked = forest.feature_importance(flattened_feature_names(data.days));
  const fs::path path = ExperimentPaths{out}.importance();
  write_importance_csv(ranked, path);
  write_meta(path, c);
  return ranked;
}

std::string cmd_report(const ExperimentConfig& c, const fs::path& out, const std::vector<fs::path>& metrics_files) {
  const ExperimentPaths paths{out};
  const auto hash = config_hash(c);
  std::vector<fs::path> files = metrics_files;
  if (files.empty())
    for (auto a : c.architectures) files.push_back(paths.metrics(a));
  std::vector<MetricSummary> rows;
  std::vector<RocSeries> curves;
  for (const auto& f : files) {
    const auto j = read_json(f);
    const auto found = j.value("config_hash", std::string());
    if (found != hash) throw DataError(f.string() + " was produced by config " + found + ", not " + hash);
    rows.push_back(metric_summary_from_json(j));
    const fs::path roc = f.parent_path() / ("roc_" + std::string(cli_name(rows.back().architecture)) + ".csv");
    if (fs::exists(roc)) curves.push_back({std::string(display_name(rows.back().architecture)), read_roc_csv(roc)});
  }
  const std::string table = format_results_table(rows);
  fs::create_directories(out);
  write_text(paths.report(), table);
  if (c.roc_svg && !curves.empty()) write_roc_svg(curves, paths.roc_svg());
  return table;
}

}  // namespace churn
