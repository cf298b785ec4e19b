#include "churn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "churn/errors.hpp"
#include "churn/rng.hpp"

namespace churn {
namespace {

constexpr std::array<double, kPlatformCount> kPlatformMix{0.45, 0.05, 0.45, 0.05};
constexpr std::array<double, kAcquisitionCount> kAcquisitionMix{0.30, 0.10, 0.60};
constexpr std::array<double, kArchetypeCount> kFbConnectedRate{0.15, 0.25, 0.55, 0.50};
constexpr std::array<double, kArchetypeCount> kProgressionScale{2.0, 8.0, 30.0, 35.0};
constexpr std::array<double, kProgressionModes> kModeWeight{1.0, 3.0, 0.5, 0.4, 0.6,
                                                           0.8, 0.3, 0.3, 0.4, 0.2};
// Days reserved at the end of the span so the last installs can still be labeled.
constexpr int kLabelLag = 37;

nlohmann::json per_archetype(const std::array<double, kArchetypeCount>& values) {
  nlohmann::json j = nlohmann::json::object();
  for (int a = 0; a < kArchetypeCount; ++a)
    j[std::string(to_string(static_cast<Archetype>(a)))] = values[static_cast<std::size_t>(a)];
  return j;
}

void read_per_archetype(const nlohmann::json& j, std::array<double, kArchetypeCount>& values,
                        const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be an object keyed by archetype");
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto a = parse_archetype(it.key());
    if (!a) throw ConfigError(std::string(what) + ": unknown archetype '" + it.key() + "'");
    values[static_cast<std::size_t>(*a)] = it.value().get<double>();
  }
}

struct DayActivity {
  Rng& rng;
  std::vector<PlayerEvent>& out;
  const std::string& id;
  double skill;

  void play(int day, double engagement) {
    const bool browsing = rng.bernoulli(0.35);  // starts missions but finishes none
    const int sessions = 1 + rng.poisson(1.0 * engagement);
    for (int s = 0; s < sessions; ++s) {
      out.push_back({id, day, EventKind::SessionStart, 0, 0});
      const int missions = (s == 0 ? 1 : 0) + rng.poisson(0.4 + 0.8 * engagement);
      for (int m = 0; m < missions; ++m) {
        out.push_back({id, day, EventKind::MissionStart, 0, 0});
        const double r = rng.uniform();
        if (browsing || r < 0.05) continue;  // abandoned
        if (rng.bernoulli(skill)) {
          out.push_back({id, day, EventKind::MissionComplete, rng.uniform_int(10, 35),
                         rng.uniform_int(500, 3000)});
        } else {
          out.push_back({id, day, EventKind::MissionFail, rng.uniform_int(20, 40), 0});
        }
      }
    }
  }
};

void simulate_player(const SynthConfig& cfg, int index, PlayerProfile& profile,
                     PlayerTrajectory& traj, std::vector<PlayerEvent>& events) {
  profile.player_id = synth_player_id(index);
  Rng rng(derive_seed(cfg.seed, profile.player_id));

  const auto arch = static_cast<Archetype>(rng.categorical(cfg.archetype_weights));
  const auto ai = static_cast<std::size_t>(arch);
  const int last_install = cfg.day_span - kLabelLag - 1;
  int install = 0;
  switch (arch) {
    case Archetype::Newbie:
      install = rng.uniform_int(std::max(0, last_install - 200), last_install);
      break;
    case Archetype::Casual: install = rng.uniform_int(0, last_install); break;
    case Archetype::Veteran: install = rng.uniform_int(0, std::max(0, cfg.day_span / 6)); break;
    case Archetype::Spender: install = rng.uniform_int(0, std::max(0, cfg.day_span / 3)); break;
  }
  profile.archetype = arch;
  profile.install_day = install;
  profile.platform = static_cast<Platform>(rng.categorical(kPlatformMix));
  profile.acquisition = static_cast<Acquisition>(rng.categorical(kAcquisitionMix));
  profile.fb_connected = rng.bernoulli(kFbConnectedRate[ai]);
  profile.skill = rng.uniform(0.35, 0.9);
  for (int m = 0; m < kProgressionModes; ++m) {
    const double mean = kProgressionScale[ai] * kModeWeight[static_cast<std::size_t>(m)];
    profile.progression[static_cast<std::size_t>(m)] =
        static_cast<int>(std::floor(mean * rng.uniform(0.5, 1.5)));
  }
  const double intensity = rng.uniform(0.7, 1.0);

  traj.player_id = profile.player_id;
  traj.archetype = arch;

  DayActivity day_activity{rng, events, profile.player_id, profile.skill};
  const int length = cfg.decline_length_days;
  int onset = -1;  // start day of the current decline, -1 when steady
  for (int day = install; day < cfg.day_span; ++day) {
    double engagement = 1.0;
    if (onset < 0 && rng.bernoulli(cfg.decline_onset_rate)) {
      onset = day;
      traj.decline_onsets.push_back(day);
    }
    if (onset >= 0) {
      const double ramp = static_cast<double>(day - onset + 1) / length;
      if (rng.bernoulli(cfg.base_hazard[ai] * ramp)) {
        traj.death_day = day;
        break;
      }
      engagement = 1.0 - (1.0 - cfg.decline_floor) * ramp;
      if (day - onset + 1 >= length) onset = -1;
    }
    const double weekly = 1.0 + cfg.weekly_amplitude * std::cos(6.283185307179586 * (day % 7) / 7.0);
    const double p_active = std::clamp(intensity * engagement * weekly, 0.0, 1.0);
    if (!rng.bernoulli(p_active)) continue;
    day_activity.play(day, engagement);
    if (arch == Archetype::Spender && rng.bernoulli(cfg.spender_purchase_rate))
      events.push_back({profile.player_id, day, EventKind::Purchase, 0, 0});
  }
}

}  // namespace

void SynthConfig::validate() const {
  if (player_count < 0) throw ConfigError("player_count must be >= 0");
  if (day_span < kLabelLag + 14) throw ConfigError("day_span must be at least 51 days");
  double total = 0.0;
  for (double w : archetype_weights) {
    if (w < 0.0) throw ConfigError("archetype weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("archetype weights must sum to 1");
  for (double h : base_hazard) {
    if (!(h > 0.0 && h < 1.0)) throw ConfigError("base hazards must lie in (0, 1)");
  }
  if (weekly_amplitude < 0.0 || weekly_amplitude > 1.0)
    throw ConfigError("weekly_amplitude must lie in [0, 1]");
  if (decline_length_days < 1) throw ConfigError("decline_length_days must be >= 1");
  if (!(decline_onset_rate > 0.0 && decline_onset_rate < 1.0))
    throw ConfigError("decline_onset_rate must lie in (0, 1)");
  if (decline_floor < 0.0 || decline_floor > 1.0) throw ConfigError("decline_floor must lie in [0, 1]");
  if (spender_purchase_rate < 0.0 || spender_purchase_rate > 1.0)
    throw ConfigError("spender_purchase_rate must lie in [0, 1]");
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = nlohmann::json{{"player_count", c.player_count},
                     {"day_span", c.day_span},
                     {"seed", c.seed},
                     {"archetype_weights", per_archetype(c.archetype_weights)},
                     {"base_hazard", per_archetype(c.base_hazard)},
                     {"weekly_amplitude", c.weekly_amplitude},
                     {"decline_length_days", c.decline_length_days},
                     {"decline_onset_rate", c.decline_onset_rate},
                     {"decline_floor", c.decline_floor},
                     {"spender_purchase_rate", c.spender_purchase_rate}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  static const std::set<std::string> known{"player_count",        "day_span",
                                           "seed",                "archetype_weights",
                                           "base_hazard",         "weekly_amplitude",
                                           "decline_length_days", "decline_onset_rate",
                                           "decline_floor",       "spender_purchase_rate"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("synth config: unknown key '" + it.key() + "'");
  }
  if (j.contains("player_count")) c.player_count = j["player_count"].get<int>();
  if (j.contains("day_span")) c.day_span = j["day_span"].get<int>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("archetype_weights")) read_per_archetype(j["archetype_weights"], c.archetype_weights, "archetype_weights");
  if (j.contains("base_hazard")) read_per_archetype(j["base_hazard"], c.base_hazard, "base_hazard");
  if (j.contains("weekly_amplitude")) c.weekly_amplitude = j["weekly_amplitude"].get<double>();
  if (j.contains("decline_length_days")) c.decline_length_days = j["decline_length_days"].get<int>();
  if (j.contains("decline_onset_rate")) c.decline_onset_rate = j["decline_onset_rate"].get<double>();
  if (j.contains("decline_floor")) c.decline_floor = j["decline_floor"].get<double>();
  if (j.contains("spender_purchase_rate")) c.spender_purchase_rate = j["spender_purchase_rate"].get<double>();
}

std::string synth_player_id(int index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "p%06d", index);
  return buf;
}

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthResult result;
  result.profiles.resize(static_cast<std::size_t>(cfg.player_count));
  result.trajectories.resize(static_cast<std::size_t>(cfg.player_count));
  std::vector<PlayerEvent> events;
  for (int i = 0; i < cfg.player_count; ++i) {
    simulate_player(cfg, i, result.profiles[static_cast<std::size_t>(i)],
                    result.trajectories[static_cast<std::size_t>(i)], events);
  }
  result.log = EventLog(std::move(events));
  return result;
}

std::filesystem::path events_path(const std::filesystem::path& dir, LogFormat format) {
  return dir / (format == LogFormat::Csv ? "events.csv" : "events.jsonl");
}

std::filesystem::path profiles_path(const std::filesystem::path& dir) { return dir / "profiles.csv"; }

void export_synth(const EventLog& log, std::span<const PlayerProfile> profiles,
                  const std::filesystem::path& dir, LogFormat format) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
  export_events(log, events_path(dir, format), format);
  write_profiles(profiles, profiles_path(dir));
}

double planted_churn_probability(const SynthConfig& cfg, const PlayerTrajectory& traj, int day,
                                 int window_days, double hazard) {
  if (traj.death_day && *traj.death_day < day) return 1.0;
  const int length = cfg.decline_length_days;
  // Probability of dying during the decline days [first_tau, last_tau].
  auto death_in_decline = [&](int first_tau, int last_tau) {
    double survive = 1.0;
    for (int tau = first_tau; tau <= std::min(length - 1, last_tau); ++tau)
      survive *= 1.0 - hazard * static_cast<double>(tau + 1) / length;
    return 1.0 - survive;
  };
  for (auto it = traj.decline_onsets.rbegin(); it != traj.decline_onsets.rend(); ++it) {
    if (*it >= day) continue;
    const int tau0 = day - *it;
    if (tau0 < length) return death_in_decline(tau0, tau0 + window_days - 1);
    break;
  }
  // Steady at the start of the window: a decline may begin on any of its days.
  const double q = cfg.decline_onset_rate;
  double p = 0.0;
  double steady = 1.0;
  for (int j = 0; j < window_days; ++j) {
    p += steady * q * death_in_decline(0, window_days - 1 - j);
    steady *= 1.0 - q;
  }
  return p;
}

}  // namespace churn
