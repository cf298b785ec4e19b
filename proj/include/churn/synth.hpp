#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "churn/eventlog.hpp"
#include "churn/profile.hpp"

namespace churn {

/// Generator settings. Every field has a documented default; the JSON form
/// accepts any subset of the keys and rejects unknown ones.
struct SynthConfig {
  int player_count = 12500;
  int day_span = 365;
  std::uint64_t seed = 7;
  // newbie, casual, veteran, spender
  std::array<double, kArchetypeCount> archetype_weights{0.52, 0.30, 0.12, 0.06};
  // Peak per-day churn hazard at the end of an engagement decline.
  std::array<double, kArchetypeCount> base_hazard{0.60, 0.45, 0.02, 0.015};
  double weekly_amplitude = 0.3;
  int decline_length_days = 10;
  // Per-day probability that a steady player enters a decline.
  double decline_onset_rate = 0.05;
  // Engagement multiplier reached on the last day of a decline.
  double decline_floor = 0.15;
  double spender_purchase_rate = 0.08;

  void validate() const;
  bool operator==(const SynthConfig&) const = default;
};

void to_json(nlohmann::json& j, const SynthConfig& cfg);
void from_json(const nlohmann::json& j, SynthConfig& cfg);

/// Latent generator state kept for oracle checks; never exported.
struct PlayerTrajectory {
  std::string player_id;
  Archetype archetype = Archetype::Casual;
  std::vector<int> decline_onsets;
  std::optional<int> death_day;
};

struct SynthResult {
  EventLog log;
  std::vector<PlayerProfile> profiles;  // ascending player id
  std::vector<PlayerTrajectory> trajectories;
};

std::string synth_player_id(int index);

/// Pure function of the config. Each player draws from its own stream keyed
/// by (seed, player_id), so output does not depend on generation order.
SynthResult generate(const SynthConfig& cfg);

/// Writes `events.csv|events.jsonl` and `profiles.csv` into `dir`.
void export_synth(const EventLog& log, std::span<const PlayerProfile> profiles,
                  const std::filesystem::path& dir, LogFormat format);

std::filesystem::path events_path(const std::filesystem::path& dir, LogFormat format);
std::filesystem::path profiles_path(const std::filesystem::path& dir);

/// Closed-form probability that a player dies within `window_days` starting at
/// `day`, given the latent state at the start of that day and the archetype's
/// hazard. Ignores declines that would both start and end inside the window.
double planted_churn_probability(const SynthConfig& cfg, const PlayerTrajectory& trajectory,
                                 int day, int window_days, double hazard);

}  // namespace churn
