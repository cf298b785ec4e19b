#include "churn/features.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "churn/errors.hpp"

namespace churn {

const std::array<std::string_view, kTemporalFeatures> kTemporalFeatureNames = {
    "activity",         "gameStarted",      "missionStarted",           "missionMovesUsed",
    "pointsPerMission", "movesPerMission",  "missionCompleted",         "missionCompletedFraction",
    "missionFailed",    "converted"};

const std::array<std::string_view, kAggregateFeatures> kAggregateFeatureNames = {
    // player description
    "fb_connected", "monthssinceinstall", "num_activedays", "maxlvl",
    // player behaviour
    "minutesplayed_sum", "minutes_perday_avg", "gamestarted_sum", "levelstarted_sum",
    "completionrate", "abandonedrate", "coinsused", "coinused_perlevel", "coinsreceived",
    "continuesused_perlevel", "boostersused_perlevel", "transaction_sum", "sum_spend",
    "total_spend", "progressionrate",
    // progression
    "daily", "main", "onelife_challenge", "social_challenge", "tournament", "treasurehunt",
    "hot_streak", "level_dash", "levelrush", "startournament",
    // platform
    "android", "fireos", "ios", "kindle",
    // acquisition channel
    "acquired", "crosspromoted", "organic"};

TemporalMatrix temporal_features(std::span<const DailyRecord> bins) {
  if (bins.empty()) throw ContractError("temporal_features: no daily records");
  for (std::size_t i = 1; i < bins.size(); ++i) {
    if (bins[i].day != bins[i - 1].day + 1)
      throw ContractError("temporal_features: records are not consecutive days");
  }
  TemporalMatrix m(static_cast<int>(bins.size()));
  for (int t = 0; t < m.days(); ++t) {
    const auto& r = bins[static_cast<std::size_t>(t)];
    const double started = r.missions_started;
    m(t, kActivity) = r.is_zero() ? 0.0 : 1.0;
    m(t, kGameStarted) = r.sessions;
    m(t, kMissionStarted) = started;
    m(t, kMissionMovesUsed) = static_cast<double>(r.total_moves);
    if (r.missions_started > 0) {
      m(t, kPointsPerMission) = static_cast<double>(r.total_points) / started;
      m(t, kMovesPerMission) = static_cast<double>(r.total_moves) / started;
      m(t, kMissionCompletedFraction) = std::min(1.0, r.missions_completed / started);
    }
    m(t, kMissionCompleted) = r.missions_completed;
    m(t, kMissionFailed) = r.missions_failed;
    m(t, kConverted) = r.purchased ? 1.0 : 0.0;
  }
  return m;
}

AggregateVector aggregate_features(const EventLog& log, const PlayerProfile& profile,
                                   int prediction_date, int lookback_days) {
  const int window_start = prediction_date - lookback_days;
  long long sessions = 0, started = 0, completed = 0, failed = 0, moves = 0, points = 0;
  long long purchases_window = 0, purchases_lifetime = 0, completed_lifetime = 0;
  int active_days = 0;
  int last_active = INT32_MIN;
  for (const auto& ev : log.player_events(profile.player_id)) {
    if (ev.day >= prediction_date) break;
    if (ev.kind == EventKind::MissionComplete) ++completed_lifetime;
    if (ev.kind == EventKind::Purchase) ++purchases_lifetime;
    if (ev.day < window_start) continue;
    if (ev.day != last_active) {
      ++active_days;
      last_active = ev.day;
    }
    switch (ev.kind) {
      case EventKind::SessionStart: ++sessions; break;
      case EventKind::MissionStart: ++started; break;
      case EventKind::MissionComplete: ++completed; break;
      case EventKind::MissionFail: ++failed; break;
      case EventKind::Purchase: ++purchases_window; break;
    }
    moves += ev.moves_used;
    points += ev.points;
  }

  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  AggregateVector v{};
  const double days_installed = std::max(0, prediction_date - profile.install_day);
  const double maxlvl = static_cast<double>(completed_lifetime);
  v[0] = profile.fb_connected ? 1.0 : 0.0;
  v[1] = days_installed / kDaysPerMonth;
  v[2] = active_days;
  v[3] = maxlvl;

  const double minutes = kMinutesPerMove * static_cast<double>(moves);
  const double coins_used = kCoinsPerContinue * static_cast<double>(failed);
  const double s = static_cast<double>(started);
  v[4] = minutes;
  v[5] = ratio(minutes, active_days);
  v[6] = static_cast<double>(sessions);
  v[7] = s;
  v[8] = std::clamp(ratio(static_cast<double>(completed), s), 0.0, 1.0);
  v[9] = std::clamp(ratio(static_cast<double>(started - completed - failed), s), 0.0, 1.0);
  v[10] = coins_used;
  v[11] = ratio(coins_used, s);
  v[12] = static_cast<double>(points) / kPointsPerCoin;
  v[13] = ratio(static_cast<double>(failed), s);
  v[14] = 1.0 - profile.skill;
  v[15] = static_cast<double>(purchases_window);
  v[16] = kPricePerPurchase * static_cast<double>(purchases_window);
  v[17] = kPricePerPurchase * static_cast<double>(purchases_lifetime);
  v[18] = maxlvl / std::max(1.0, days_installed);

  for (int m = 0; m < kProgressionModes; ++m)
    v[kProgressionOffset + m] = profile.progression[static_cast<std::size_t>(m)];
  const int platform = static_cast<int>(profile.platform);
  const int acquisition = static_cast<int>(profile.acquisition);
  if (platform < 0 || platform >= kPlatformCount) throw ConfigError("unknown platform");
  if (acquisition < 0 || acquisition >= kAcquisitionCount) throw ConfigError("unknown acquisition channel");
  v[kPlatformOffset + platform] = 1.0;
  v[kAcquisitionOffset + acquisition] = 1.0;
  return v;
}

std::vector<double> flatten(const LabeledSample& sample, bool include_aggregate) {
  auto values = sample.temporal.values();
  std::vector<double> out(values.begin(), values.end());
  if (include_aggregate) out.insert(out.end(), sample.aggregate.begin(), sample.aggregate.end());
  return out;
}

TemporalMatrix reshape(std::span<const double> flat, int days) {
  TemporalMatrix m(days);
  if (flat.size() < m.values().size()) throw ContractError("reshape: vector too short");
  std::copy_n(flat.begin(), m.values().size(), m.values().begin());
  return m;
}

std::vector<std::string> flattened_feature_names(int days) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(days) * kTemporalFeatures);
  for (int t = 0; t < days; ++t) {
    for (auto name : kTemporalFeatureNames)
      names.push_back(std::string(name) + "_" + std::to_string(days - t));
  }
  return names;
}

void Dataset::append(const LabeledSample& sample) {
  if (sample.temporal.days() != days) throw ContractError("Dataset::append: day count mismatch");
  player_ids.push_back(sample.player_id);
  prediction_dates.push_back(sample.prediction_date);
  auto t = sample.temporal.values();
  temporal.insert(temporal.end(), t.begin(), t.end());
  aggregate.insert(aggregate.end(), sample.aggregate.begin(), sample.aggregate.end());
  labels.push_back(sample.label);
  converted.push_back(sample.aggregate[kTotalSpendIndex] > 0.0 ? 1 : 0);
}

LabeledSample Dataset::sample(std::size_t i) const {
  LabeledSample s;
  s.player_id = player_ids[i];
  s.prediction_date = prediction_dates[i];
  s.temporal = reshape(temporal_row(i), days);
  auto a = aggregate_row(i);
  std::copy(a.begin(), a.end(), s.aggregate.begin());
  s.label = labels[i];
  return s;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.days = days;
  for (std::size_t r : rows) {
    out.player_ids.push_back(player_ids[r]);
    out.prediction_dates.push_back(prediction_dates[r]);
    auto t = temporal_row(r);
    out.temporal.insert(out.temporal.end(), t.begin(), t.end());
    auto a = aggregate_row(r);
    out.aggregate.insert(out.aggregate.end(), a.begin(), a.end());
    out.labels.push_back(labels[r]);
    out.converted.push_back(converted[r]);
  }
  return out;
}

Dataset featurize(const EventLog& log, std::span<const PlayerProfile> profiles,
                  std::span<const SampleRef> samples, int observation_days, int lookback_days) {
  std::unordered_map<std::string, const PlayerProfile*> by_id;
  for (const auto& p : profiles) by_id.emplace(p.player_id, &p);
  Dataset data;
  data.days = observation_days;
  for (const auto& ref : samples) {
    auto it = by_id.find(ref.player_id);
    if (it == by_id.end()) throw DataError("no profile for player " + ref.player_id);
    if (ref.label == ChurnLabel::NotEligible) throw ContractError("featurize: ineligible sample");
    LabeledSample s;
    s.player_id = ref.player_id;
    s.prediction_date = ref.prediction_date;
    auto bins = daily_bins(log, ref.player_id, ref.prediction_date - observation_days, ref.prediction_date);
    s.temporal = temporal_features(bins);
    s.aggregate = aggregate_features(log, *it->second, ref.prediction_date, lookback_days);
    s.label = ref.label == ChurnLabel::Churner ? 1 : 0;
    data.append(s);
  }
  return data;
}

namespace {

constexpr double kConstantStd = 1e-12;

// Population standard deviation; near-zero spread marks the column constant.
void set_spread(double sq_dev, std::size_t n, double& stddev, bool& constant) {
  stddev = std::sqrt(sq_dev / static_cast<double>(n));
  constant = !(stddev > kConstantStd);
  if (constant) stddev = 1.0;
}

}  // namespace

Scaler fit_scaler(const Dataset& data, std::span<const std::size_t> rows) {
  if (rows.size() < 2) throw ContractError("fit_scaler: need at least 2 training samples");
  Scaler sc;
  const int days = data.days;
  const double n_t = static_cast<double>(rows.size()) * days;
  for (int f = 0; f < kTemporalFeatures; ++f) {
    double sum = 0.0;
    for (std::size_t r : rows) {
      auto row = data.temporal_row(r);
      for (int t = 0; t < days; ++t) sum += row[static_cast<std::size_t>(t) * kTemporalFeatures + f];
    }
    const double mean = sum / n_t;
    double sq = 0.0;
    for (std::size_t r : rows) {
      auto row = data.temporal_row(r);
      for (int t = 0; t < days; ++t) {
        const double d = row[static_cast<std::size_t>(t) * kTemporalFeatures + f] - mean;
        sq += d * d;
      }
    }
    sc.temporal_mean[f] = mean;
    set_spread(sq, rows.size() * static_cast<std::size_t>(days), sc.temporal_std[f], sc.temporal_constant[f]);
  }
  const double n_a = static_cast<double>(rows.size());
  for (int j = 0; j < kAggregateFeatures; ++j) {
    double sum = 0.0;
    for (std::size_t r : rows) sum += data.aggregate_row(r)[j];
    const double mean = sum / n_a;
    double sq = 0.0;
    for (std::size_t r : rows) {
      const double d = data.aggregate_row(r)[j] - mean;
      sq += d * d;
    }
    sc.aggregate_mean[j] = mean;
    set_spread(sq, rows.size(), sc.aggregate_std[j], sc.aggregate_constant[j]);
  }
  return sc;
}

Scaler fit_scaler(const Dataset& data) {
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return fit_scaler(data, rows);
}

void Scaler::apply_temporal(std::span<double> row) const {
  for (std::size_t k = 0; k < row.size(); ++k) {
    const std::size_t f = k % kTemporalFeatures;
    if (!temporal_constant[f]) row[k] = (row[k] - temporal_mean[f]) / temporal_std[f];
  }
}

void Scaler::apply_aggregate(std::span<double> row) const {
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (!aggregate_constant[j]) row[j] = (row[j] - aggregate_mean[j]) / aggregate_std[j];
  }
}

Dataset apply_scaler(const Scaler& scaler, const Dataset& data) {
  Dataset out = data;
  const std::size_t w = out.temporal_width();
  for (std::size_t i = 0; i < out.size(); ++i) {
    scaler.apply_temporal(std::span<double>(out.temporal).subspan(i * w, w));
    scaler.apply_aggregate(std::span<double>(out.aggregate).subspan(i * kAggregateFeatures, kAggregateFeatures));
  }
  return out;
}

LabeledSample apply_scaler(const Scaler& scaler, const LabeledSample& sample) {
  LabeledSample out = sample;
  scaler.apply_temporal(out.temporal.values());
  scaler.apply_aggregate(out.aggregate);
  return out;
}

}  // namespace churn
