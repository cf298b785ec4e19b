#include "churn/labeling.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "churn/errors.hpp"

namespace churn {

void ChurnConfig::validate() const {
  if (observation_days < 1 || observation_days % 7 != 0)
    throw ConfigError("observation_days must be a positive multiple of 7");
  if (churn_span_days < 1) throw ConfigError("churn_span_days must be >= 1");
  // 0 is accepted and yields an empty churner set.
  if (prediction_offset_days < 0) throw ConfigError("prediction_offset_days must be >= 0");
  if (sampling_count < 1) throw ConfigError("sampling_count must be >= 1");
  if (sampling_spacing_days <= observation_days)
    throw ConfigError("sampling_spacing_days must exceed observation_days");
}

std::string_view to_string(ChurnLabel label) {
  switch (label) {
    case ChurnLabel::Churner: return "churner";
    case ChurnLabel::NonChurner: return "nonchurner";
    case ChurnLabel::NotEligible: return "noteligible";
  }
  return "?";
}

std::optional<int> churn_date(std::span<const int> activity, int horizon, int span) {
  auto end = std::lower_bound(activity.begin(), activity.end(), horizon);
  for (auto it = activity.begin(); it != end; ++it) {
    const int d = *it;
    if (d + span >= horizon) return std::nullopt;  // later days are censored too
    auto next = std::upper_bound(it, end, d);
    if (next == end || *next > d + span) return d;
    it = next - 1;
  }
  return std::nullopt;
}

ChurnLabel label_player(std::span<const int> activity, int prediction_date, const ChurnConfig& cfg,
                        int horizon) {
  cfg.validate();
  if (horizon < prediction_date + cfg.label_lag())
    throw ConfigError("horizon " + std::to_string(horizon) + " censors labels at prediction date " +
                      std::to_string(prediction_date));
  const int window_start = prediction_date - cfg.observation_days;
  auto first = std::lower_bound(activity.begin(), activity.end(), window_start);
  if (first == activity.end() || *first >= prediction_date) return ChurnLabel::NotEligible;
  if (cfg.prediction_offset_days == 0) return ChurnLabel::NonChurner;

  // Gaps that start before the observation window are irrelevant: the player
  // came back, and that return is what made them eligible.
  auto cd = churn_date(std::span<const int>(first, activity.end()), horizon, cfg.churn_span_days);
  if (cd && *cd <= prediction_date + cfg.prediction_offset_days - 1) return ChurnLabel::Churner;
  return ChurnLabel::NonChurner;
}

std::vector<int> sampling_dates(int first_date, const ChurnConfig& cfg) {
  std::vector<int> dates;
  dates.reserve(static_cast<std::size_t>(std::max(cfg.sampling_count, 0)));
  for (int i = 0; i < cfg.sampling_count; ++i) dates.push_back(first_date + i * cfg.sampling_spacing_days);
  return dates;
}

std::vector<SampleRef> build_samples(const EventLog& log, std::span<const int> dates,
                                     const ChurnConfig& cfg, int horizon) {
  std::vector<SampleRef> samples;
  for (int date : dates) {
    for (const auto& id : log.player_ids()) {
      auto label = label_player(log.activity_days(id), date, cfg, horizon);
      if (label != ChurnLabel::NotEligible) samples.push_back({id, date, label});
    }
  }
  return samples;
}

void write_manifest(std::span<const SampleRef> samples, std::ostream& out) {
  out << "player_id,prediction_date,label\n";
  for (const auto& s : samples) {
    if (s.label == ChurnLabel::NotEligible)
      throw ContractError("manifest rows must be eligible samples");
    out << s.player_id << ',' << s.prediction_date << ',' << to_string(s.label) << '\n';
  }
}

void write_manifest(std::span<const SampleRef> samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  write_manifest(samples, out);
}

std::vector<SampleRef> read_manifest(std::istream& in) {
  std::vector<SampleRef> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "player_id,prediction_date,label")
        throw DataError("manifest: missing header 'player_id,prediction_date,label'");
      continue;
    }
    if (line.empty()) continue;
    auto c1 = line.find(',');
    auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw DataError("manifest line " + std::to_string(line_no) + ": expected 3 fields");
    SampleRef ref;
    ref.player_id = line.substr(0, c1);
    const std::string date = line.substr(c1 + 1, c2 - c1 - 1);
    auto [ptr, ec] = std::from_chars(date.data(), date.data() + date.size(), ref.prediction_date);
    if (ec != std::errc{} || ptr != date.data() + date.size())
      throw DataError("manifest line " + std::to_string(line_no) + ": bad prediction_date");
    const std::string label = line.substr(c2 + 1);
    if (label == "churner")
      ref.label = ChurnLabel::Churner;
    else if (label == "nonchurner")
      ref.label = ChurnLabel::NonChurner;
    else
      throw DataError("manifest line " + std::to_string(line_no) + ": bad label '" + label + "'");
    samples.push_back(std::move(ref));
  }
  return samples;
}

std::vector<SampleRef> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  return read_manifest(in);
}

}  // namespace churn
