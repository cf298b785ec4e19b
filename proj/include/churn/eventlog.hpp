#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace churn {

enum class EventKind : std::uint8_t {
  SessionStart,
  MissionStart,
  MissionComplete,
  MissionFail,
  Purchase,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

inline bool is_mission_event(EventKind kind) {
  return kind == EventKind::MissionStart || kind == EventKind::MissionComplete ||
         kind == EventKind::MissionFail;
}

/// One raw telemetry row. `day` counts whole UTC days since a fixed epoch.
struct PlayerEvent {
  std::string player_id;
  int day = 0;
  EventKind kind = EventKind::SessionStart;
  int moves_used = 0;
  int points = 0;

  bool operator==(const PlayerEvent&) const = default;
};

/// Returns an empty string if the event satisfies the row invariants,
/// otherwise a short reason.
std::string validate_event(const PlayerEvent& event);

/// Per-player, per-day counts of the raw events.
struct DailyRecord {
  std::string player_id;
  int day = 0;
  int sessions = 0;
  int missions_started = 0;
  int missions_completed = 0;
  int missions_failed = 0;
  long long total_moves = 0;
  long long total_points = 0;
  bool purchased = false;

  bool is_zero() const {
    return sessions == 0 && missions_started == 0 && missions_completed == 0 &&
           missions_failed == 0 && total_moves == 0 && total_points == 0 && !purchased;
  }
  bool operator==(const DailyRecord&) const = default;
};

/// Immutable event store, sorted by (player_id, day). Within a day the
/// original row order is preserved.
class EventLog {
 public:
  EventLog() = default;
  explicit EventLog(std::vector<PlayerEvent> events);

  std::span<const PlayerEvent> events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  /// Events of one player in non-decreasing day order; empty if unknown.
  std::span<const PlayerEvent> player_events(std::string_view player_id) const;

  /// Sorted, de-duplicated days on which the player generated any event.
  std::span<const int> activity_days(std::string_view player_id) const;

  /// Known players in ascending id order.
  const std::vector<std::string>& player_ids() const { return player_ids_; }

  /// One past the largest day in the log (0 for an empty log).
  int day_end() const { return day_end_; }

  bool operator==(const EventLog& other) const { return events_ == other.events_; }

 private:
  struct PlayerIndex {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::vector<int> days;
  };

  std::vector<PlayerEvent> events_;
  std::vector<std::string> player_ids_;
  std::unordered_map<std::string, PlayerIndex> index_;
  int day_end_ = 0;
};

enum class LogFormat { Csv, Jsonl };

std::optional<LogFormat> parse_log_format(std::string_view text);
/// Picks the format from the file extension (.jsonl / .json → Jsonl, else Csv).
LogFormat log_format_for(const std::filesystem::path& path);

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct IngestResult {
  EventLog log;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<RejectedRow> rejects;
};

/// Reads an event file. Malformed rows are rejected and recorded with their
/// 1-based line number; an unreadable file throws DataError.
IngestResult ingest(const std::filesystem::path& path, LogFormat format);
IngestResult ingest(std::istream& in, LogFormat format);

/// Writes the log with a stable field order and LF line endings.
void export_events(const EventLog& log, std::ostream& out, LogFormat format);
void export_events(const EventLog& log, const std::filesystem::path& path, LogFormat format);

/// Exactly end - start records, zero-filled on inactive days.
std::vector<DailyRecord> daily_bins(const EventLog& log, std::string_view player_id, int start,
                                    int end);

/// Copy of EventLog::activity_days for callers that want an owned set.
std::vector<int> activity_days(const EventLog& log, std::string_view player_id);

}  // namespace churn
