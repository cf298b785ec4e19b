#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "churn/dataset_io.hpp"
#include "churn/errors.hpp"
#include "churn/experiment.hpp"

namespace py = pybind11;
using namespace churn;

namespace {

ExperimentConfig parse_config(const std::string& text) { return experiment_from_json(nlohmann::json::parse(text)); }

py::dict summary_dict(const MetricSummary& s) {
  py::dict d;
  d["architecture"] = std::string(cli_name(s.architecture));
  d["auc"] = py::make_tuple(s.auc.mean, s.auc.two_sigma);
  d["f1"] = py::make_tuple(s.f1.mean, s.f1.two_sigma);
  d["accuracy"] = py::make_tuple(s.accuracy.mean, s.accuracy.two_sigma);
  d["complete"] = s.complete;
  py::list folds;
  for (const auto& f : s.folds) folds.append(py::make_tuple(f.auc, f.f1, f.accuracy));
  d["folds"] = folds;
  return d;
}

ChurnConfig churn_config(int observation, int span, int offset) {
  ChurnConfig c;
  c.observation_days = observation;
  c.churn_span_days = span;
  c.prediction_offset_days = offset;
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Churn prediction toolkit";
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("config_hash", [](const std::string& cfg) { return config_hash(parse_config(cfg)); });
  m.def("synth", [](const std::string& cfg, const std::filesystem::path& out) {
    const auto s = cmd_synth(parse_config(cfg), out);
    return py::make_tuple(s.players, s.events);
  });
  m.def("label", [](const std::string& cfg, const std::filesystem::path& out) {
    const auto s = cmd_label(parse_config(cfg), out);
    return py::make_tuple(s.eligible, s.churners);
  });
  m.def("featurize", [](const std::string& cfg, const std::filesystem::path& out) {
    return cmd_featurize(parse_config(cfg), out);
  });
  m.def("train", [](const std::string& cfg, const std::filesystem::path& out, const std::string& arch) {
    const auto id = parse_architecture(arch);
    if (!id) throw ConfigError("unknown architecture '" + arch + "'");
    return cmd_train(parse_config(cfg), out, *id);
  });
  m.def("evaluate", [](const std::string& cfg, const std::filesystem::path& out) {
    py::list rows;
    for (const auto& s : cmd_eval(parse_config(cfg), out)) rows.append(summary_dict(s));
    return rows;
  });
  m.def("importance", [](const std::string& cfg, const std::filesystem::path& out) {
    py::list rows;
    for (const auto& r : cmd_importance(parse_config(cfg), out)) rows.append(py::make_tuple(r.rank, r.name, r.importance));
    return rows;
  });
  m.def("report", [](const std::string& cfg, const std::filesystem::path& out) {
    return cmd_report(parse_config(cfg), out, {});
  });

  m.def("load_dataset", [](const std::filesystem::path& path) {
    auto loaded = read_dataset(path);
    const Dataset& d = loaded.data;
    const auto n = static_cast<py::ssize_t>(d.size());
    py::array_t<double> temporal({n, static_cast<py::ssize_t>(d.days), static_cast<py::ssize_t>(kTemporalFeatures)});
    std::copy(d.temporal.begin(), d.temporal.end(), temporal.mutable_data());
    py::array_t<double> aggregate({n, static_cast<py::ssize_t>(kAggregateFeatures)});
    std::copy(d.aggregate.begin(), d.aggregate.end(), aggregate.mutable_data());
    py::dict out;
    out["player_ids"] = d.player_ids;
    out["prediction_dates"] = d.prediction_dates;
    out["labels"] = py::array_t<int>(n, d.labels.data());
    out["temporal"] = temporal;
    out["aggregate"] = aggregate;
    out["data_hash"] = loaded.data_hash;
    return out;
  });

  m.def("churn_date", [](std::vector<int> activity, int horizon, int span) {
    return churn_date(activity, horizon, span);
  }, py::arg("activity"), py::arg("horizon"), py::arg("span") = 30);
  m.def("label_player",
        [](std::vector<int> activity, int prediction_date, int horizon, int observation, int span, int offset) {
          return std::string(to_string(label_player(activity, prediction_date, churn_config(observation, span, offset),
                                                    horizon)));
        },
        py::arg("activity"), py::arg("prediction_date"), py::arg("horizon"), py::arg("observation_days") = 14,
        py::arg("churn_span_days") = 30, py::arg("prediction_offset_days") = 7);

  m.def("roc_auc", [](std::vector<double> s, std::vector<int> y) { return roc_auc(s, y); });
  m.def("roc_curve", [](std::vector<double> s, std::vector<int> y) {
    py::list pts;
    for (const auto& p : roc_curve(s, y)) pts.append(py::make_tuple(p.fpr, p.tpr, p.threshold));
    return pts;
  });
  m.def("confusion", [](std::vector<double> s, std::vector<int> y, double threshold) {
    const auto c = confusion(s, y, threshold);
    py::dict d;
    d["tp"] = c.tp;
    d["fp"] = c.fp;
    d["tn"] = c.tn;
    d["fn"] = c.fn;
    d["accuracy"] = accuracy(c);
    d["f1"] = f1(c);
    return d;
  }, py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);
  m.def("stratified_kfold", [](std::vector<int> y, int k, std::uint64_t seed) {
    return stratified_kfold(y, k, seed).test_folds;
  });
}
