#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "churn/eventlog.hpp"

namespace churn {

/// Window lengths of the churn definition plus the sampling scheme.
struct ChurnConfig {
  int observation_days = 14;
  int churn_span_days = 30;
  int prediction_offset_days = 7;
  int sampling_spacing_days = 18;
  int sampling_count = 8;

  /// Throws ConfigError when a field is out of range.
  void validate() const;

  /// Days that must follow a prediction date before its label is fully observed.
  int label_lag() const { return prediction_offset_days + churn_span_days; }

  bool operator==(const ChurnConfig&) const = default;
};

enum class ChurnLabel { Churner, NonChurner, NotEligible };

std::string_view to_string(ChurnLabel label);

/// Smallest active day d with no activity in (d, d + span] and d + span < horizon.
/// Only days below `horizon` are treated as known. `activity` must be sorted
/// ascending; duplicates are allowed.
std::optional<int> churn_date(std::span<const int> activity, int horizon, int span);

/// Labels one (player, prediction date) pair.
///
/// A player is eligible if active in [prediction_date - observation_days,
/// prediction_date). An eligible player is a churner if a churn date (the last
/// active day before a fully observed gap of churn_span_days) lies in
/// [prediction_date - observation_days, prediction_date + prediction_offset_days - 1].
/// Throws ConfigError if the horizon would censor the label.
ChurnLabel label_player(std::span<const int> activity, int prediction_date, const ChurnConfig& cfg,
                        int horizon);

std::vector<int> sampling_dates(int first_date, const ChurnConfig& cfg);

struct SampleRef {
  std::string player_id;
  int prediction_date = 0;
  ChurnLabel label = ChurnLabel::NonChurner;

  bool operator==(const SampleRef&) const = default;
};

/// One record per eligible (player, date); ordered by date, then player id.
std::vector<SampleRef> build_samples(const EventLog& log, std::span<const int> dates,
                                     const ChurnConfig& cfg, int horizon);

/// Manifest CSV: `player_id,prediction_date,label`, label in {churner, nonchurner}.
void write_manifest(std::span<const SampleRef> samples, std::ostream& out);
void write_manifest(std::span<const SampleRef> samples, const std::filesystem::path& path);
std::vector<SampleRef> read_manifest(std::istream& in);
std::vector<SampleRef> read_manifest(const std::filesystem::path& path);

}  // namespace churn
