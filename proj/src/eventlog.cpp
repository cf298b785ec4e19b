#include "churn/eventlog.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <variant>

#include <json.hpp>

#include "churn/errors.hpp"

namespace churn {
namespace {

constexpr std::string_view kCsvHeader = "player_id,day,kind,moves_used,points";

constexpr std::string_view kKindNames[] = {"session_start", "mission_start", "mission_complete",
                                           "mission_fail", "purchase"};

std::optional<long long> parse_int(std::string_view text) {
  long long value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || text.empty()) return std::nullopt;
  return value;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

// Returns the event or a rejection reason.
std::variant<PlayerEvent, std::string> parse_csv_row(std::string_view line) {
  auto fields = split_commas(line);
  if (fields.size() != 5) return std::string("expected 5 fields");
  PlayerEvent ev;
  ev.player_id = std::string(fields[0]);
  auto day = parse_int(fields[1]);
  if (!day) return std::string("day is not an integer");
  auto kind = parse_event_kind(fields[2]);
  if (!kind) return std::string("unknown event kind");
  auto moves = parse_int(fields[3]);
  auto points = parse_int(fields[4]);
  if (!moves || !points) return std::string("moves_used/points not integers");
  if (*day > INT32_MAX || *moves > INT32_MAX || *points > INT32_MAX || *day < INT32_MIN ||
      *moves < INT32_MIN || *points < INT32_MIN)
    return std::string("integer out of range");
  ev.day = static_cast<int>(*day);
  ev.kind = *kind;
  ev.moves_used = static_cast<int>(*moves);
  ev.points = static_cast<int>(*points);
  if (auto reason = validate_event(ev); !reason.empty()) return reason;
  return ev;
}

std::variant<PlayerEvent, std::string> parse_jsonl_row(std::string_view line) {
  auto obj = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded() || !obj.is_object()) return std::string("not a JSON object");
  for (const char* key : {"player_id", "day", "kind", "moves_used", "points"}) {
    if (!obj.contains(key)) return std::string("missing field ") + key;
  }
  if (!obj["player_id"].is_string() || !obj["kind"].is_string())
    return std::string("player_id/kind must be strings");
  for (const char* key : {"day", "moves_used", "points"}) {
    if (!obj[key].is_number_integer()) return std::string(key) + " is not an integer";
  }
  PlayerEvent ev;
  ev.player_id = obj["player_id"].get<std::string>();
  auto kind = parse_event_kind(obj["kind"].get<std::string>());
  if (!kind) return std::string("unknown event kind");
  const auto day = obj["day"].get<long long>();
  const auto moves = obj["moves_used"].get<long long>();
  const auto points = obj["points"].get<long long>();
  if (day > INT32_MAX || moves > INT32_MAX || points > INT32_MAX || day < INT32_MIN ||
      moves < INT32_MIN || points < INT32_MIN)
    return std::string("integer out of range");
  ev.day = static_cast<int>(day);
  ev.kind = *kind;
  ev.moves_used = static_cast<int>(moves);
  ev.points = static_cast<int>(points);
  if (auto reason = validate_event(ev); !reason.empty()) return reason;
  return ev;
}

}  // namespace

std::string_view to_string(EventKind kind) { return kKindNames[static_cast<int>(kind)]; }

std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (int i = 0; i < 5; ++i) {
    if (text == kKindNames[i]) return static_cast<EventKind>(i);
  }
  return std::nullopt;
}

std::string validate_event(const PlayerEvent& ev) {
  if (ev.player_id.empty()) return "empty player_id";
  if (ev.player_id.find_first_of(",\"\n\r") != std::string::npos)
    return "player_id contains a reserved character";
  if (ev.day < 0) return "negative day";
  if (ev.moves_used < 0 || ev.points < 0) return "negative moves_used/points";
  if (!is_mission_event(ev.kind) && (ev.moves_used != 0 || ev.points != 0))
    return "moves_used/points must be 0 for non-mission events";
  return {};
}

EventLog::EventLog(std::vector<PlayerEvent> events) : events_(std::move(events)) {
  for (const auto& ev : events_) {
    if (auto reason = validate_event(ev); !reason.empty())
      throw ContractError("invalid event for player '" + ev.player_id + "': " + reason);
  }
  std::stable_sort(events_.begin(), events_.end(), [](const PlayerEvent& a, const PlayerEvent& b) {
    if (a.player_id != b.player_id) return a.player_id < b.player_id;
    return a.day < b.day;
  });
  std::size_t i = 0;
  while (i < events_.size()) {
    std::size_t j = i;
    PlayerIndex entry;
    entry.begin = i;
    while (j < events_.size() && events_[j].player_id == events_[i].player_id) {
      if (entry.days.empty() || entry.days.back() != events_[j].day)
        entry.days.push_back(events_[j].day);
      day_end_ = std::max(day_end_, events_[j].day + 1);
      ++j;
    }
    entry.end = j;
    player_ids_.push_back(events_[i].player_id);
    index_.emplace(events_[i].player_id, std::move(entry));
    i = j;
  }
}

std::span<const PlayerEvent> EventLog::player_events(std::string_view player_id) const {
  auto it = index_.find(std::string(player_id));
  if (it == index_.end()) return {};
  return std::span<const PlayerEvent>(events_).subspan(it->second.begin,
                                                       it->second.end - it->second.begin);
}

std::span<const int> EventLog::activity_days(std::string_view player_id) const {
  auto it = index_.find(std::string(player_id));
  if (it == index_.end()) return {};
  return it->second.days;
}

std::optional<LogFormat> parse_log_format(std::string_view text) {
  if (text == "csv") return LogFormat::Csv;
  if (text == "jsonl") return LogFormat::Jsonl;
  return std::nullopt;
}

LogFormat log_format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".json") ? LogFormat::Jsonl : LogFormat::Csv;
}

IngestResult ingest(std::istream& in, LogFormat format) {
  IngestResult result;
  std::vector<PlayerEvent> events;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = format == LogFormat::Jsonl;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (line != kCsvHeader)
        throw DataError("line 1: expected CSV header '" + std::string(kCsvHeader) + "'");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    auto parsed = format == LogFormat::Csv ? parse_csv_row(line) : parse_jsonl_row(line);
    if (auto* ev = std::get_if<PlayerEvent>(&parsed)) {
      events.push_back(std::move(*ev));
      ++result.accepted;
    } else {
      result.rejects.push_back({line_no, std::get<std::string>(parsed)});
      ++result.rejected;
    }
  }
  result.log = EventLog(std::move(events));
  return result;
}

IngestResult ingest(const std::filesystem::path& path, LogFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open event file " + path.string());
  return ingest(in, format);
}

void export_events(const EventLog& log, std::ostream& out, LogFormat format) {
  if (format == LogFormat::Csv) {
    out << kCsvHeader << '\n';
    for (const auto& ev : log.events()) {
      out << ev.player_id << ',' << ev.day << ',' << to_string(ev.kind) << ',' << ev.moves_used
          << ',' << ev.points << '\n';
    }
    return;
  }
  for (const auto& ev : log.events()) {
    nlohmann::ordered_json obj;
    obj["player_id"] = ev.player_id;
    obj["day"] = ev.day;
    obj["kind"] = std::string(to_string(ev.kind));
    obj["moves_used"] = ev.moves_used;
    obj["points"] = ev.points;
    out << obj.dump() << '\n';
  }
}

void export_events(const EventLog& log, const std::filesystem::path& path, LogFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write event file " + path.string());
  export_events(log, out, format);
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<DailyRecord> daily_bins(const EventLog& log, std::string_view player_id, int start,
                                    int end) {
  if (start >= end) throw ContractError("daily_bins: empty day range");
  std::vector<DailyRecord> bins(static_cast<std::size_t>(end - start));
  for (int d = start; d < end; ++d) {
    auto& rec = bins[static_cast<std::size_t>(d - start)];
    rec.player_id = std::string(player_id);
    rec.day = d;
  }
  auto events = log.player_events(player_id);
  auto first = std::lower_bound(events.begin(), events.end(), start,
                                [](const PlayerEvent& ev, int day) { return ev.day < day; });
  for (auto it = first; it != events.end() && it->day < end; ++it) {
    auto& rec = bins[static_cast<std::size_t>(it->day - start)];
    switch (it->kind) {
      case EventKind::SessionStart: ++rec.sessions; break;
      case EventKind::MissionStart: ++rec.missions_started; break;
      case EventKind::MissionComplete: ++rec.missions_completed; break;
      case EventKind::MissionFail: ++rec.missions_failed; break;
      case EventKind::Purchase: rec.purchased = true; break;
    }
    rec.total_moves += it->moves_used;
    rec.total_points += it->points;
  }
  return bins;
}

std::vector<int> activity_days(const EventLog& log, std::string_view player_id) {
  auto days = log.activity_days(player_id);
  return {days.begin(), days.end()};
}

}  // namespace churn
