#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"({
  "seed": 5,
  "synth": {"player_count": 1500},
  "train": {"max_epochs": 2, "batch_size": 64},
  "forest": {"n_trees": 8},
  "folds": 2,
  "roc_svg": true
})";

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CHURN_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void pipeline(const fs::path& cfg, const fs::path& out) {
  const std::string common = "--config " + cfg.string() + " --out " + out.string();
  for (const char* step : {"synth", "label", "featurize", "eval", "importance"}) {
    INFO(step, ": ", slurp(out.parent_path() / "log.txt"));
    REQUIRE(run_cli(std::string(step) + " " + common, out.parent_path() / "log.txt") == 0);
  }
}

}  // namespace

TEST_CASE("cli pipeline is reproducible") {
  testing::TempDir dir("cli");
  const fs::path cfg = dir.path / "config.json";
  std::ofstream(cfg) << kSmallConfig;
  pipeline(cfg, dir.path / "a");
  pipeline(cfg, dir.path / "b");
  for (const char* name : {"metrics_lstm.json", "metrics_rf.json", "metrics_lstm-hidden.json", "samples.csv",
                           "importance.csv", "results.txt", "roc_ann.csv"}) {
    INFO(name);
    const auto a = slurp(dir.path / "a" / name);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(dir.path / "b" / name));
  }
  CHECK(fs::exists(dir.path / "a" / "roc.svg"));
  CHECK(fs::exists(dir.path / "a" / "samples.csv.meta.json"));

  const fs::path log = dir.path / "log.txt";
  CHECK(run_cli("train --arch lstm-hidden --config " + cfg.string() + " --out " + (dir.path / "a").string(), log) == 0);
  CHECK(fs::exists(dir.path / "a" / "model_lstm-hidden.bin"));

  CHECK(run_cli("report --config " + cfg.string() + " --out " + (dir.path / "a").string(), log) == 0);
  const auto table = slurp(log);
  for (const char* row : {"Baseline RF", "Baseline ANN", "Baseline LSTM", "LSTM + Aggregated", "LSTM Predict + Aggr.",
                          "LSTM Hidden State", "Static in LSTM"})
    CHECK(table.find(row) != std::string::npos);

  // Artifacts made under another config are refused.
  CHECK(run_cli("featurize --seed 6 --config " + cfg.string() + " --out " + (dir.path / "a").string(), log) == 2);
  CHECK(slurp(log).find("config") != std::string::npos);
}

TEST_CASE("cli exit codes") {
  testing::TempDir dir("cli-codes");
  const fs::path log = dir.path / "log.txt";
  CHECK(run_cli("", log) == 1);
  CHECK(run_cli("synth --no-such-flag", log) == 1);
  CHECK(run_cli("eval --arch gru --out " + dir.path.string(), log) == 2);
  const fs::path bad = dir.path / "bad.json";
  std::ofstream(bad) << R"({"synth": {"seed": 3}})";
  CHECK(run_cli("synth --config " + bad.string() + " --out " + dir.path.string(), log) == 2);
  std::ofstream(dir.path / "broken.json") << "{";
  CHECK(run_cli("synth --config " + (dir.path / "broken.json").string(), log) == 2);
  CHECK(run_cli("label --out " + (dir.path / "empty").string(), log) == 2);
}
