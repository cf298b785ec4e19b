#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "churn/eventlog.hpp"
#include "churn/labeling.hpp"
#include "churn/profile.hpp"

namespace churn {

inline constexpr int kTemporalFeatures = 10;
inline constexpr int kAggregateFeatures = 36;
inline constexpr int kDefaultLookbackDays = 183;

/// Column order of the temporal matrix.
enum TemporalColumn : int {
  kActivity = 0,
  kGameStarted,
  kMissionStarted,
  kMissionMovesUsed,
  kPointsPerMission,
  kMovesPerMission,
  kMissionCompleted,
  kMissionCompletedFraction,
  kMissionFailed,
  kConverted,
};

extern const std::array<std::string_view, kTemporalFeatures> kTemporalFeatureNames;
extern const std::array<std::string_view, kAggregateFeatures> kAggregateFeatureNames;

// Offsets of the aggregate groups.
inline constexpr int kDescriptionOffset = 0;   // 4 entries
inline constexpr int kBehaviourOffset = 4;     // 15 entries
inline constexpr int kProgressionOffset = 19;  // 10 entries
inline constexpr int kPlatformOffset = 29;     // 4 entries, one-hot
inline constexpr int kAcquisitionOffset = 33;  // 3 entries, one-hot
inline constexpr int kTotalSpendIndex = 17;

// Proxy constants for quantities the event schema does not carry.
inline constexpr double kDaysPerMonth = 30.44;
inline constexpr double kMinutesPerMove = 0.25;
inline constexpr double kCoinsPerContinue = 10.0;
inline constexpr double kPointsPerCoin = 100.0;
inline constexpr double kPricePerPurchase = 4.99;

/// n_t x 10 matrix, row-major. Row t holds day prediction_date - n_t + t.
class TemporalMatrix {
 public:
  TemporalMatrix() : TemporalMatrix(14) {}
  explicit TemporalMatrix(int days) : days_(days), values_(static_cast<std::size_t>(days) * kTemporalFeatures, 0.0) {}

  int days() const { return days_; }
  double& operator()(int t, int f) { return values_[static_cast<std::size_t>(t) * kTemporalFeatures + f]; }
  double operator()(int t, int f) const { return values_[static_cast<std::size_t>(t) * kTemporalFeatures + f]; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const TemporalMatrix&) const = default;

 private:
  int days_;
  std::vector<double> values_;
};

using AggregateVector = std::array<double, kAggregateFeatures>;

struct LabeledSample {
  std::string player_id;
  int prediction_date = 0;
  TemporalMatrix temporal;
  AggregateVector aggregate{};
  int label = 0;
};

TemporalMatrix temporal_features(std::span<const DailyRecord> bins);

AggregateVector aggregate_features(const EventLog& log, const PlayerProfile& profile,
                                   int prediction_date, int lookback_days = kDefaultLookbackDays);

/// Day-major, feature-minor flattening; appends the aggregate vector on request.
std::vector<double> flatten(const LabeledSample& sample, bool include_aggregate);
TemporalMatrix reshape(std::span<const double> flat, int days);

/// `<feature>_<k>` with k = days ago (1 = most recent), in flattening order.
std::vector<std::string> flattened_feature_names(int days);

/// Featurized samples stored column-contiguous per block for fast model access.
struct Dataset {
  int days = 14;
  std::vector<std::string> player_ids;
  std::vector<int> prediction_dates;
  std::vector<double> temporal;   // rows x days x 10
  std::vector<double> aggregate;  // rows x 36
  std::vector<int> labels;
  std::vector<std::uint8_t> converted;  // lifetime spend > 0 at prediction time

  std::size_t size() const { return labels.size(); }
  std::size_t temporal_width() const { return static_cast<std::size_t>(days) * kTemporalFeatures; }
  std::span<const double> temporal_row(std::size_t i) const {
    return std::span<const double>(temporal).subspan(i * temporal_width(), temporal_width());
  }
  std::span<const double> aggregate_row(std::size_t i) const {
    return std::span<const double>(aggregate).subspan(i * kAggregateFeatures, kAggregateFeatures);
  }
  void append(const LabeledSample& sample);
  LabeledSample sample(std::size_t i) const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

/// Featurizes every manifest row. Profiles are looked up by player id;
/// a missing profile throws DataError.
Dataset featurize(const EventLog& log, std::span<const PlayerProfile> profiles,
                  std::span<const SampleRef> samples, int observation_days,
                  int lookback_days = kDefaultLookbackDays);

/// Z-score parameters. Temporal statistics are per feature column, pooled
/// over days; aggregate statistics are per entry.
struct Scaler {
  std::array<double, kTemporalFeatures> temporal_mean{};
  std::array<double, kTemporalFeatures> temporal_std{};
  std::array<bool, kTemporalFeatures> temporal_constant{};
  AggregateVector aggregate_mean{};
  AggregateVector aggregate_std{};
  std::array<bool, kAggregateFeatures> aggregate_constant{};

  void apply_temporal(std::span<double> row) const;
  void apply_aggregate(std::span<double> row) const;

  bool operator==(const Scaler&) const = default;
};

/// Fits on the given rows only. Throws ContractError with fewer than 2 rows.
Scaler fit_scaler(const Dataset& data, std::span<const std::size_t> rows);
Scaler fit_scaler(const Dataset& data);
Dataset apply_scaler(const Scaler& scaler, const Dataset& data);
LabeledSample apply_scaler(const Scaler& scaler, const LabeledSample& sample);

}  // namespace churn
