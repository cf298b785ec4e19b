#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "churn/eventlog.hpp"
#include "churn/features.hpp"
#include "churn/rng.hpp"

namespace testing {

inline churn::EventLog random_log(churn::Rng& rng, int players, int events, int day_span) {
  std::vector<churn::PlayerEvent> out;
  for (int i = 0; i < events; ++i) {
    churn::PlayerEvent e;
    e.player_id = "u" + std::to_string(rng.below(static_cast<std::uint64_t>(players)));
    e.day = static_cast<int>(rng.below(static_cast<std::uint64_t>(day_span)));
    e.kind = static_cast<churn::EventKind>(rng.below(5));
    if (churn::is_mission_event(e.kind)) {
      e.moves_used = static_cast<int>(rng.below(40));
      e.points = static_cast<int>(rng.below(500));
    }
    out.push_back(e);
  }
  return churn::EventLog(std::move(out));
}

/// Random temporal features; the label is the sign of feature 0 on the last
/// day, kept away from zero. Aggregates cycle through four patterns so they
/// cannot identify rows. Every third row counts as converted.
inline churn::Dataset toy_dataset(std::uint64_t seed, std::size_t n, int days = 14) {
  churn::Rng rng(seed);
  churn::Dataset d;
  d.days = days;
  const std::size_t width = static_cast<std::size_t>(days) * churn::kTemporalFeatures;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t base = d.temporal.size();
    for (std::size_t k = 0; k < width; ++k) d.temporal.push_back(rng.normal());
    double& key = d.temporal[base + width - churn::kTemporalFeatures];
    while (std::abs(key) < 0.3) key = rng.normal();
    for (int k = 0; k < churn::kAggregateFeatures; ++k)
      d.aggregate.push_back(static_cast<int>(i % 4) == k % 4 ? 1.0 + 0.1 * k : 0.0);
    d.labels.push_back(key > 0 ? 1 : 0);
    d.player_ids.push_back("p" + std::to_string(i));
    d.prediction_dates.push_back(100);
    d.converted.push_back(i % 3 == 0 ? 1 : 0);
  }
  return d;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("churn-test-" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

struct GradCheck {
  double max_error = 0.0;  // max |a - n| / max(|a|, |n|, floor)
  std::size_t worst = 0;
};

/// Compares `analytic` with central differences of `f` around `params`.
inline GradCheck check_gradient(std::vector<double>& params, std::span<const double> analytic,
                                const std::function<double()>& f, double step = 1e-5, double floor = 1e-6) {
  GradCheck out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = f();
    params[i] = saved - step;
    const double down = f();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) / std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    if (err > out.max_error) {
      out.max_error = err;
      out.worst = i;
    }
  }
  return out;
}

}  // namespace testing
