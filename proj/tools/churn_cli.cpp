#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "churn/errors.hpp"
#include "churn/experiment.hpp"

namespace fs = std::filesystem;
using namespace churn;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::vector<std::string> archs;
  std::optional<int> folds;
  std::string cohort;
  std::vector<std::string> metrics_files;
};

ExperimentConfig resolve(const Options& o) {
  nlohmann::json j = nlohmann::json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw ConfigError("cannot read config " + o.config);
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("malformed config " + o.config + ": " + e.what());
    }
  }
  if (o.seed) j["seed"] = *o.seed;
  if (!o.archs.empty()) j["architectures"] = o.archs;
  if (o.folds) j["folds"] = *o.folds;
  if (!o.cohort.empty()) j["cohort"] = o.cohort;
  return experiment_from_json(j);
}

ArchitectureId single_arch(const ExperimentConfig& c, const Options& o) {
  if (o.archs.size() > 1) throw ConfigError("train takes a single --arch");
  if (o.archs.empty() && c.architectures.size() != 1) throw ConfigError("train needs --arch");
  return c.architectures.front();
}

int run(const std::string& command, const Options& o) {
  const ExperimentConfig c = resolve(o);
  const fs::path out = o.out;
  std::printf("config %s\n", config_hash(c).c_str());
  if (command == "synth") {
    const auto s = cmd_synth(c, out);
    std::printf("wrote %zu events for %zu players to %s\n", s.events, s.players, out.string().c_str());
  } else if (command == "label") {
    const auto s = cmd_label(c, out);
    std::printf("%zu eligible samples, %zu churners (%.1f%%), horizon %d, dates %d..%d\n", s.eligible, s.churners,
                s.eligible ? 100.0 * static_cast<double>(s.churners) / static_cast<double>(s.eligible) : 0.0,
                s.horizon, s.dates.front(), s.dates.back());
  } else if (command == "featurize") {
    std::printf("featurized %zu samples\n", cmd_featurize(c, out));
  } else if (command == "train") {
    std::printf("wrote %s\n", cmd_train(c, out, single_arch(c, o)).string().c_str());
  } else if (command == "eval") {
    const auto rows = cmd_eval(c, out);
    std::fputs(format_results_table(rows).c_str(), stdout);
  } else if (command == "importance") {
    const auto ranked = cmd_importance(c, out);
    for (std::size_t i = 0; i < ranked.size() && i < 10; ++i)
      std::printf("%3d  %-28s %.6f\n", ranked[i].rank, ranked[i].name.c_str(), ranked[i].importance);
  } else if (command == "report") {
    std::vector<fs::path> files(o.metrics_files.begin(), o.metrics_files.end());
    std::fputs(cmd_report(c, out, files).c_str(), stdout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Churn prediction toolkit"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "Experiment config (JSON)");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_option("--arch", o.archs, "Architecture: rf, ann, lstm, lstm-agg, lstm-pred-agg, lstm-hidden, static-in-lstm");
  app.add_option("--folds", o.folds, "Cross-validation folds");
  app.add_option("--cohort", o.cohort, "Evaluate on a cohort only")->check(CLI::IsMember({"all", "converted"}));

  std::string command;
  const std::pair<const char*, const char*> commands[] = {
      {"synth", "Generate a synthetic event log and player profiles"},
      {"label", "Sample prediction dates and label players"},
      {"featurize", "Build temporal and aggregate feature tensors"},
      {"train", "Cross-validate one architecture and write its metrics"},
      {"eval", "Cross-validate every configured architecture"},
      {"importance", "Rank random forest feature importances"},
      {"report", "Tabulate metrics JSON files"}};
  for (const auto& [name, about] : commands) {
    auto* sub = app.add_subcommand(name, about);
    sub->fallthrough();
    sub->callback([&command, name] { command = name; });
    if (std::string(name) == "report") sub->add_option("metrics", o.metrics_files, "Metrics JSON files");
  }
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    return run(command, o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const ContractError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
