#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace churn {

enum class Archetype { Newbie, Casual, Veteran, Spender };
enum class Platform { Android, FireOs, Ios, Kindle };
enum class Acquisition { Acquired, CrossPromoted, Organic };

inline constexpr int kArchetypeCount = 4;
inline constexpr int kPlatformCount = 4;
inline constexpr int kAcquisitionCount = 3;
inline constexpr int kProgressionModes = 10;

std::string_view to_string(Archetype a);
std::string_view to_string(Platform p);
std::string_view to_string(Acquisition a);
std::optional<Archetype> parse_archetype(std::string_view text);
std::optional<Platform> parse_platform(std::string_view text);
std::optional<Acquisition> parse_acquisition(std::string_view text);

extern const std::array<std::string_view, kProgressionModes> kProgressionModeNames;

/// Static per-player attributes. The archetype is generator ground truth and is
/// never fed to a model directly.
struct PlayerProfile {
  std::string player_id;
  Archetype archetype = Archetype::Casual;
  int install_day = 0;
  Platform platform = Platform::Android;
  Acquisition acquisition = Acquisition::Organic;
  bool fb_connected = false;
  double skill = 0.5;
  std::array<int, kProgressionModes> progression{};

  bool operator==(const PlayerProfile&) const = default;
};

/// Profile CSV: `player_id,archetype,install_day,platform,acquisition,fb_connected,skill`
/// followed by one `prog_<mode>` column per progression counter.
void write_profiles(std::span<const PlayerProfile> profiles, std::ostream& out);
void write_profiles(std::span<const PlayerProfile> profiles, const std::filesystem::path& path);
std::vector<PlayerProfile> read_profiles(std::istream& in);
std::vector<PlayerProfile> read_profiles(const std::filesystem::path& path);

}  // namespace churn
