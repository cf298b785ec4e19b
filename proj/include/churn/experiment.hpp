#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "churn/architectures.hpp"
#include "churn/eval.hpp"
#include "churn/labeling.hpp"
#include "churn/synth.hpp"

namespace churn {

/// One experiment. The JSON form accepts any subset of the keys; unknown
/// keys are rejected. Sub-seeds (generator, folds, training, forest) are all
/// derived from the master `seed`, so the sections carry no seed keys.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  // Data source: the synthetic generator, or an event file plus profiles.
  std::string source = "synth";
  std::filesystem::path event_log;
  std::filesystem::path profiles;
  int horizon = 0;               // 0: synth day_span, or one past the last logged day
  int first_sampling_date = -1;  // -1: latest dates whose labels are fully observed
  SynthConfig synth;
  ChurnConfig churn;
  int lookback_days = kDefaultLookbackDays;
  ModelDims dims;
  nn::TrainConfig train;
  ForestConfig forest;
  std::vector<ArchitectureId> architectures{kAllArchitectures.begin(), kAllArchitectures.end()};
  int folds = 10;
  bool cohort_converted = false;
  SigmaMode sigma_mode = SigmaMode::StandardError;
  bool lstm_agg_joint = true;
  bool roc_svg = true;

  void validate() const;
};

nlohmann::ordered_json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the canonical JSON of the config.
std::string config_hash(const ExperimentConfig& c);
/// Same over the keys that shape the data artifacts (seed, data, synth,
/// churn, lookback_days), so model and evaluation settings can change
/// without invalidating them.
std::string data_hash(const ExperimentConfig& c);

/// Seeds actually used by each stage.
SynthConfig resolved_synth(const ExperimentConfig& c);
ArchitectureOptions resolved_options(const ExperimentConfig& c);
std::uint64_t fold_seed(const ExperimentConfig& c);

/// Data horizon and sampling dates used by `label`.
int resolved_horizon(const ExperimentConfig& c, const EventLog& log);
std::vector<int> resolved_sampling_dates(const ExperimentConfig& c, int horizon);

/// Output files inside the experiment directory.
struct ExperimentPaths {
  std::filesystem::path dir;
  std::filesystem::path events() const { return dir / "events.csv"; }
  std::filesystem::path profiles() const { return dir / "profiles.csv"; }
  std::filesystem::path samples() const { return dir / "samples.csv"; }
  std::filesystem::path dataset() const { return dir / "dataset.bin"; }
  std::filesystem::path model(ArchitectureId a) const;
  std::filesystem::path metrics(ArchitectureId a) const;
  std::filesystem::path roc(ArchitectureId a) const;
  std::filesystem::path importance() const { return dir / "importance.csv"; }
  std::filesystem::path results_table() const { return dir / "results.txt"; }
  std::filesystem::path report() const { return dir / "report.txt"; }
  std::filesystem::path roc_svg() const { return dir / "roc.svg"; }
};

/// Sidecar `<file>.meta.json` carrying the config and data hashes of a CSV output.
void write_meta(const std::filesystem::path& file, const ExperimentConfig& c, const nlohmann::ordered_json& extra = {});
/// Throws DataError when the sidecar is missing or its data hash differs.
void require_data_hash(const std::filesystem::path& file, const ExperimentConfig& c);

struct SynthSummary {
  std::size_t players = 0;
  std::size_t events = 0;
};
struct LabelSummary {
  std::size_t eligible = 0;
  std::size_t churners = 0;
  int horizon = 0;
  std::vector<int> dates;
};

SynthSummary cmd_synth(const ExperimentConfig& c, const std::filesystem::path& out);
LabelSummary cmd_label(const ExperimentConfig& c, const std::filesystem::path& out);
std::size_t cmd_featurize(const ExperimentConfig& c, const std::filesystem::path& out);
/// Trains on every row of the dataset.
std::filesystem::path cmd_train(const ExperimentConfig& c, const std::filesystem::path& out, ArchitectureId arch);
/// Cross-validates every configured architecture; writes metrics, ROC and
/// the results table. Returns the summaries in configuration order.
std::vector<MetricSummary> cmd_eval(const ExperimentConfig& c, const std::filesystem::path& out);
std::vector<RankedFeature> cmd_importance(const ExperimentConfig& c, const std::filesystem::path& out);
/// Table over the given metrics files (all configured architectures when
/// empty), plus a ROC overlay built from the neighbouring ROC CSVs.
std::string cmd_report(const ExperimentConfig& c, const std::filesystem::path& out,
                       const std::vector<std::filesystem::path>& metrics_files);

}  // namespace churn
