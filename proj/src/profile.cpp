#include "churn/profile.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "churn/errors.hpp"

namespace churn {
namespace {

constexpr std::string_view kArchetypeNames[] = {"newbie", "casual", "veteran", "spender"};
constexpr std::string_view kPlatformNames[] = {"android", "fireos", "ios", "kindle"};
constexpr std::string_view kAcquisitionNames[] = {"acquired", "crosspromoted", "organic"};

template <typename E, std::size_t N>
std::optional<E> parse_named(std::string_view text, const std::string_view (&names)[N]) {
  for (std::size_t i = 0; i < N; ++i) {
    if (text == names[i]) return static_cast<E>(i);
  }
  return std::nullopt;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename T>
T parse_number(const std::string& text, std::size_t line_no, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw DataError("profiles line " + std::to_string(line_no) + ": bad " + what);
  return value;
}

std::string header() {
  std::string h = "player_id,archetype,install_day,platform,acquisition,fb_connected,skill";
  for (auto mode : kProgressionModeNames) h += ",prog_" + std::string(mode);
  return h;
}

}  // namespace

const std::array<std::string_view, kProgressionModes> kProgressionModeNames = {
    "daily",      "main",         "onelife_challenge", "social_challenge", "tournament",
    "treasurehunt", "hot_streak", "level_dash",        "levelrush",        "startournament"};

std::string_view to_string(Archetype a) { return kArchetypeNames[static_cast<int>(a)]; }
std::string_view to_string(Platform p) { return kPlatformNames[static_cast<int>(p)]; }
std::string_view to_string(Acquisition a) { return kAcquisitionNames[static_cast<int>(a)]; }

std::optional<Archetype> parse_archetype(std::string_view text) {
  return parse_named<Archetype>(text, kArchetypeNames);
}
std::optional<Platform> parse_platform(std::string_view text) {
  return parse_named<Platform>(text, kPlatformNames);
}
std::optional<Acquisition> parse_acquisition(std::string_view text) {
  return parse_named<Acquisition>(text, kAcquisitionNames);
}

void write_profiles(std::span<const PlayerProfile> profiles, std::ostream& out) {
  out << header() << '\n';
  char buf[32];
  for (const auto& p : profiles) {
    // Shortest round-trip representation keeps the file byte-deterministic.
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), p.skill);
    out << p.player_id << ',' << to_string(p.archetype) << ',' << p.install_day << ','
        << to_string(p.platform) << ',' << to_string(p.acquisition) << ','
        << (p.fb_connected ? 1 : 0) << ',' << std::string_view(buf, end - buf);
    for (int c : p.progression) out << ',' << c;
    out << '\n';
  }
}

void write_profiles(std::span<const PlayerProfile> profiles, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write profiles " + path.string());
  write_profiles(profiles, out);
}

std::vector<PlayerProfile> read_profiles(std::istream& in) {
  std::vector<PlayerProfile> profiles;
  std::string line;
  std::size_t line_no = 0;
  const std::string expected_header = header();
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != expected_header) throw DataError("profiles: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    auto f = split(line);
    if (f.size() != 7 + kProgressionModes)
      throw DataError("profiles line " + std::to_string(line_no) + ": wrong field count");
    PlayerProfile p;
    p.player_id = f[0];
    auto arch = parse_archetype(f[1]);
    auto plat = parse_platform(f[3]);
    auto acq = parse_acquisition(f[4]);
    if (!arch || !plat || !acq)
      throw DataError("profiles line " + std::to_string(line_no) + ": unknown category");
    p.archetype = *arch;
    p.platform = *plat;
    p.acquisition = *acq;
    p.install_day = parse_number<int>(f[2], line_no, "install_day");
    const int fb = parse_number<int>(f[5], line_no, "fb_connected");
    if (fb != 0 && fb != 1) throw DataError("profiles line " + std::to_string(line_no) + ": fb_connected");
    p.fb_connected = fb == 1;
    p.skill = parse_number<double>(f[6], line_no, "skill");
    for (int m = 0; m < kProgressionModes; ++m) p.progression[m] = parse_number<int>(f[7 + m], line_no, "progression");
    profiles.push_back(std::move(p));
  }
  return profiles;
}

std::vector<PlayerProfile> read_profiles(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open profiles " + path.string());
  return read_profiles(in);
}

}  // namespace churn
