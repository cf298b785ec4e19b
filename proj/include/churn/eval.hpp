#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "churn/architectures.hpp"

namespace churn {

struct FoldPlan {
  int k = 10;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> test_folds;  // ascending indices

  std::size_t size() const;
  /// Every index not in test fold `f`, ascending.
  std::vector<std::size_t> train_indices(int f) const;
};

/// Each class is shuffled and dealt round-robin, positives continuing where
/// negatives left off, so fold sizes differ by at most one. Throws
/// ConfigError when a class has fewer than k members.
FoldPlan stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed);

/// Rank statistic with midranks for ties. Throws ContractError unless both
/// classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // score >= threshold is predicted positive
};

/// Starts at (0,0) with an infinite threshold, then one point per distinct
/// score in decreasing order, ending at (1,1).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);
double trapezoid_area(std::span<const RocPoint> curve);
void write_roc_csv(std::span<const RocPoint> curve, std::ostream& out);

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t n() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// score > threshold counts as a predicted churner.
ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);
double accuracy(const ConfusionCounts& c);
double precision(const ConfusionCounts& c);
double recall(const ConfusionCounts& c);
double f1(const ConfusionCounts& c);

enum class SigmaMode { StandardError, FoldStd };
std::string_view to_string(SigmaMode mode);
SigmaMode parse_sigma_mode(std::string_view text);

struct MetricStat {
  double mean = 0.0;
  double two_sigma = 0.0;
};

/// Mean and 2 * sample std (divided by sqrt(n) for the standard error).
MetricStat aggregate_metric(std::span<const double> values, SigmaMode mode);

struct FoldMetrics {
  int fold = 0;
  bool failed = false;
  std::string error;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  double auc = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

struct MetricSummary {
  ArchitectureId architecture = ArchitectureId::BaselineLSTM;
  int k = 0;
  SigmaMode sigma_mode = SigmaMode::StandardError;
  bool cohort_filtered = false;
  bool complete = true;
  std::vector<FoldMetrics> folds;
  MetricStat auc, f1, accuracy;
};

struct CvResult {
  MetricSummary summary;
  std::vector<Scaler> fold_scalers;    // neural architectures; one per completed fold
  std::vector<int> fold_of_scaler;
  std::vector<std::size_t> oof_rows;   // evaluated test rows, fold by fold
  std::vector<double> oof_scores;
  std::vector<int> oof_labels;
};

using CohortFilter = std::function<bool(const Dataset&, std::size_t)>;

/// Cohort restricting evaluation to players with any spend so far.
bool converted_cohort(const Dataset& data, std::size_t row);

/// Per fold: train on the other folds (training seeds derived from the fold
/// number), then score the test fold, optionally restricted by `cohort`.
CvResult run_cv(const Dataset& data, ArchitectureId arch, const ArchitectureOptions& opts, const FoldPlan& plan,
                const CohortFilter& cohort = {}, SigmaMode mode = SigmaMode::StandardError);

nlohmann::ordered_json to_json(const MetricSummary& s);
MetricSummary metric_summary_from_json(const nlohmann::json& j);

/// `0.8592(12)`: the uncertainty in units of the last printed digit.
std::string format_with_uncertainty(const MetricStat& stat, int decimals = 4);
/// Model | AUC | F1 | Accuracy, one row per summary.
std::string format_results_table(std::span<const MetricSummary> rows);

struct RocSeries {
  std::string name;
  std::vector<RocPoint> points;
};
void write_roc_svg(std::span<const RocSeries> series, const std::filesystem::path& path);

}  // namespace churn
