#include <doctest.h>

#include <numeric>
#include <set>
#include <sstream>

#include "churn/errors.hpp"
#include "churn/labeling.hpp"
#include "churn/synth.hpp"
#include "support.hpp"

using namespace churn;

namespace {

std::vector<int> range(int a, int b) {
  std::vector<int> v(static_cast<std::size_t>(b - a));
  std::iota(v.begin(), v.end(), a);
  return v;
}

}  // namespace

TEST_CASE("churn_date examples") {
  CHECK(churn_date(range(0, 100), 150, 30) == 99);
  CHECK(churn_date(std::vector<int>{95}, 150, 30) == 95);
  CHECK(churn_date(std::vector<int>{99, 104, 140}, 200, 30) == 104);
  CHECK(!churn_date(std::vector<int>{}, 100, 30));
  // gap not fully observed below the horizon
  CHECK(!churn_date(std::vector<int>{95}, 125, 30));
  CHECK(churn_date(std::vector<int>{95}, 126, 30) == 95);
  // activity at or past the horizon is unknown
  CHECK(churn_date(std::vector<int>{95, 120}, 200, 30) == 120);
  CHECK(churn_date(std::vector<int>{95, 120}, 120, 30) == std::nullopt);
  CHECK(churn_date(std::vector<int>{95, 130}, 130, 30) == 95);
}

TEST_CASE("label_player examples") {
  ChurnConfig cfg;
  const int horizon = 200;
  CHECK(label_player(range(86, 151), 100, cfg, horizon) == ChurnLabel::NonChurner);
  CHECK(label_player(std::vector<int>{95}, 100, cfg, horizon) == ChurnLabel::Churner);
  // churn date 108 lies one day past the prediction window
  CHECK(label_player(std::vector<int>{99, 108}, 100, cfg, horizon) == ChurnLabel::NonChurner);
  CHECK(label_player(std::vector<int>{99, 106}, 100, cfg, horizon) == ChurnLabel::Churner);
  CHECK(label_player(std::vector<int>{50, 100, 120}, 100, cfg, horizon) == ChurnLabel::NotEligible);
  CHECK(label_player(std::vector<int>{}, 100, cfg, horizon) == ChurnLabel::NotEligible);
  // an old gap before the observation window does not count
  CHECK(label_player(std::vector<int>{10, 90, 91, 92}, 100, cfg, horizon) == ChurnLabel::Churner);
  CHECK(label_player(std::vector<int>{10, 90, 91, 92, 110}, 100, cfg, horizon) == ChurnLabel::NonChurner);
}

TEST_CASE("label_player edge cases") {
  ChurnConfig cfg;
  CHECK_THROWS_AS(label_player(std::vector<int>{95}, 100, cfg, 136), ConfigError);
  CHECK_NOTHROW(label_player(std::vector<int>{95}, 100, cfg, 137));
  cfg.prediction_offset_days = 0;
  CHECK(label_player(std::vector<int>{95}, 100, cfg, 200) == ChurnLabel::NonChurner);
  ChurnConfig bad;
  bad.observation_days = 10;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ChurnConfig{};
  bad.sampling_spacing_days = 14;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("sampling_dates") {
  ChurnConfig cfg;
  CHECK(sampling_dates(200, cfg) == std::vector<int>{200, 218, 236, 254, 272, 290, 308, 326});
  cfg.sampling_count = 1;
  CHECK(sampling_dates(200, cfg) == std::vector<int>{200});
  cfg = ChurnConfig{};
  auto dates = sampling_dates(50, cfg);
  for (std::size_t i = 0; i < dates.size(); ++i)
    for (std::size_t j = i + 1; j < dates.size(); ++j)
      CHECK(dates[i] <= dates[j] - cfg.observation_days);  // [d-14, d) windows are disjoint
}

TEST_CASE("label properties on random patterns") {
  Rng rng(5);
  ChurnConfig cfg;
  for (int trial = 0; trial < 300; ++trial) {
    std::set<int> days;
    const int n = static_cast<int>(rng.below(12));
    for (int i = 0; i < n; ++i) days.insert(static_cast<int>(rng.below(150)));
    std::vector<int> act(days.begin(), days.end());
    const int pd = 20 + static_cast<int>(rng.below(100));
    const int horizon = 200;
    const auto label = label_player(act, pd, cfg, horizon);

    // translation invariance
    std::vector<int> shifted;
    for (int d : act) shifted.push_back(d + 37);
    CHECK(label_player(shifted, pd + 37, cfg, horizon + 37) == label);

    // late activity cannot undo an observed churn
    if (label == ChurnLabel::Churner) {
      auto more = act;
      more.push_back(pd + cfg.prediction_offset_days - 1 + cfg.churn_span_days + 1);
      std::sort(more.begin(), more.end());
      CHECK(label_player(more, pd, cfg, horizon) == ChurnLabel::Churner);
    }

    // with an endless span only the final activity day can be a churn date
    ChurnConfig forever = cfg;
    forever.churn_span_days = 100000;
    if (label != ChurnLabel::NotEligible) {
      const bool quits = act.back() <= pd + cfg.prediction_offset_days - 1;
      CHECK(label_player(act, pd, forever, pd + forever.label_lag()) ==
            (quits ? ChurnLabel::Churner : ChurnLabel::NonChurner));
    }
  }
}

TEST_CASE("manifest round trip and build_samples oracle") {
  SynthConfig sc;
  sc.player_count = 500;
  sc.day_span = 200;
  auto gen = generate(sc);
  ChurnConfig cfg;
  const int horizon = 200;
  auto dates = sampling_dates(40, cfg);
  dates.resize(5);
  auto samples = build_samples(gen.log, dates, cfg, horizon);
  std::size_t k = 0;
  for (int d : dates)
    for (const auto& id : gen.log.player_ids()) {
      auto label = label_player(gen.log.activity_days(id), d, cfg, horizon);
      if (label == ChurnLabel::NotEligible) continue;
      REQUIRE(k < samples.size());
      CHECK(samples[k] == SampleRef{id, d, label});
      ++k;
    }
  CHECK(k == samples.size());

  std::stringstream buf;
  write_manifest(samples, buf);
  CHECK(buf.str().rfind("player_id,prediction_date,label\n", 0) == 0);
  CHECK(read_manifest(buf) == samples);

  CHECK(build_samples(EventLog{}, dates, cfg, horizon).empty());
  std::vector<PlayerEvent> ev;
  for (int d = 86; d < 100; ++d) ev.push_back({"solo", d, EventKind::SessionStart, 0, 0});
  auto s = build_samples(EventLog(ev), std::vector<int>{100}, cfg, 200);
  REQUIRE(s.size() == 1);
  CHECK(s[0].label == ChurnLabel::Churner);
}
