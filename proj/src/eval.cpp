#include "churn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "churn/errors.hpp"
#include "churn/rng.hpp"

namespace churn {
namespace {

void check_scores(std::span<const double> scores, std::span<const int> labels, const char* what) {
  if (scores.size() != labels.size()) throw ContractError(std::string(what) + ": scores and labels differ in length");
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ContractError(std::string(what) + ": labels must be 0 or 1");
    if (std::isnan(scores[i])) throw ContractError(std::string(what) + ": NaN score");
    (labels[i] ? pos : neg) = true;
  }
  if (!pos || !neg) throw ContractError(std::string(what) + ": both classes must be present");
}

std::vector<std::size_t> order_by_score_desc(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::size_t FoldPlan::size() const {
  std::size_t n = 0;
  for (const auto& f : test_folds) n += f.size();
  return n;
}

std::vector<std::size_t> FoldPlan::train_indices(int f) const {
  std::vector<std::size_t> out;
  out.reserve(size());
  for (int g = 0; g < static_cast<int>(test_folds.size()); ++g)
    if (g != f) out.insert(out.end(), test_folds[g].begin(), test_folds[g].end());
  std::sort(out.begin(), out.end());
  return out;
}

FoldPlan stratified_kfold(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("folds must be >= 2");
  std::vector<std::size_t> classes[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ContractError("stratified_kfold: labels must be 0 or 1");
    classes[labels[i]].push_back(i);
  }
  for (int c = 0; c < 2; ++c)
    if (classes[c].size() < static_cast<std::size_t>(k))
      throw ConfigError("stratified_kfold: class " + std::to_string(c) + " has " + std::to_string(classes[c].size()) +
                        " samples, fewer than " + std::to_string(k) + " folds");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.test_folds.resize(static_cast<std::size_t>(k));
  Rng rng(seed, hash_string("stratified-kfold"));
  std::size_t position = 0;
  for (auto& members : classes) {
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t idx : members) plan.test_folds[position++ % static_cast<std::size_t>(k)].push_back(idx);
  }
  for (auto& f : plan.test_folds) std::sort(f.begin(), f.end());
  return plan;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_scores(scores, labels, "roc_auc");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]]) {
        rank_sum += midrank;
        ++positives;
      }
    i = j;
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(n - positives);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_scores(scores, labels, "roc_curve");
  std::size_t p = 0;
  for (int y : labels) p += static_cast<std::size_t>(y);
  const double np = static_cast<double>(p), nn = static_cast<double>(labels.size() - p);
  auto order = order_by_score_desc(scores);
  std::vector<RocPoint> curve{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    curve.push_back({static_cast<double>(fp) / nn, static_cast<double>(tp) / np, s});
  }
  return curve;
}

double trapezoid_area(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) / 2.0;
  return area;
}

void write_roc_csv(std::span<const RocPoint> curve, std::ostream& out) {
  out << "fpr,tpr,threshold\n";
  for (const auto& pt : curve) {
    out << fmt("%.17g", pt.fpr) << ',' << fmt("%.17g", pt.tpr) << ',';
    if (std::isinf(pt.threshold))
      out << "inf";
    else
      out << fmt("%.17g", pt.threshold);
    out << '\n';
  }
}

ConfusionCounts confusion(std::span<const double> scores, std::span<const int> labels, double threshold) {
  if (scores.size() != labels.size()) throw ContractError("confusion: scores and labels differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > threshold;
    if (labels[i])
      (predicted ? c.tp : c.fn) += 1;
    else
      (predicted ? c.fp : c.tn) += 1;
  }
  return c;
}

double accuracy(const ConfusionCounts& c) {
  return c.n() == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(c.n());
}

double precision(const ConfusionCounts& c) {
  return c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall(const ConfusionCounts& c) {
  return c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

double f1(const ConfusionCounts& c) {
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  return c.tp == 0 ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

std::string_view to_string(SigmaMode mode) {
  return mode == SigmaMode::StandardError ? "standard_error" : "fold_std";
}

SigmaMode parse_sigma_mode(std::string_view text) {
  if (text == "standard_error") return SigmaMode::StandardError;
  if (text == "fold_std") return SigmaMode::FoldStd;
  throw ConfigError("unknown sigma mode '" + std::string(text) + "' (standard_error | fold_std)");
}

MetricStat aggregate_metric(std::span<const double> values, SigmaMode mode) {
  MetricStat s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  s.two_sigma = mode == SigmaMode::StandardError ? 2.0 * sd / std::sqrt(n) : 2.0 * sd;
  return s;
}

bool converted_cohort(const Dataset& data, std::size_t row) { return data.converted[row] != 0; }

CvResult run_cv(const Dataset& data, ArchitectureId arch, const ArchitectureOptions& opts, const FoldPlan& plan,
                const CohortFilter& cohort, SigmaMode mode) {
  if (plan.size() != data.size()) throw ContractError("run_cv: fold plan does not cover the dataset");
  CvResult result;
  MetricSummary& s = result.summary;
  s.architecture = arch;
  s.k = plan.k;
  s.sigma_mode = mode;
  s.cohort_filtered = static_cast<bool>(cohort);
  std::vector<double> aucs, f1s, accs;
  for (int f = 0; f < static_cast<int>(plan.test_folds.size()); ++f) {
    FoldMetrics fm;
    fm.fold = f;
    const auto train_rows = plan.train_indices(f);
    std::vector<std::size_t> test_rows;
    for (std::size_t r : plan.test_folds[f])
      if (!cohort || cohort(data, r)) test_rows.push_back(r);
    fm.train_count = train_rows.size();
    fm.test_count = test_rows.size();
    ArchitectureOptions fold_opts = opts;
    const std::string key = "fold-" + std::to_string(f);
    fold_opts.train.seed = derive_seed(opts.train.seed, key);
    fold_opts.forest.seed = derive_seed(opts.forest.seed, key);
    try {
      const TrainedModel model = train_architecture(arch, data, train_rows, fold_opts);
      const auto scores = model.predict(data, test_rows);
      std::vector<int> labels;
      labels.reserve(test_rows.size());
      for (std::size_t r : test_rows) labels.push_back(data.labels[r]);
      fm.auc = roc_auc(scores, labels);
      const auto counts = confusion(scores, labels);
      fm.f1 = f1(counts);
      fm.accuracy = accuracy(counts);
      if (model.scaler) {
        result.fold_scalers.push_back(*model.scaler);
        result.fold_of_scaler.push_back(f);
      }
      result.oof_rows.insert(result.oof_rows.end(), test_rows.begin(), test_rows.end());
      result.oof_scores.insert(result.oof_scores.end(), scores.begin(), scores.end());
      result.oof_labels.insert(result.oof_labels.end(), labels.begin(), labels.end());
      aucs.push_back(fm.auc);
      f1s.push_back(fm.f1);
      accs.push_back(fm.accuracy);
    } catch (const NumericError& e) {
      fm.failed = true;
      fm.error = e.what();
    } catch (const ContractError& e) {
      fm.failed = true;
      fm.error = e.what();
    }
    s.complete = s.complete && !fm.failed;
    s.folds.push_back(std::move(fm));
  }
  s.auc = aggregate_metric(aucs, mode);
  s.f1 = aggregate_metric(f1s, mode);
  s.accuracy = aggregate_metric(accs, mode);
  return result;
}

nlohmann::ordered_json to_json(const MetricSummary& s) {
  nlohmann::ordered_json j;
  j["architecture"] = std::string(cli_name(s.architecture));
  j["model"] = std::string(display_name(s.architecture));
  j["folds"] = s.k;
  j["sigma_mode"] = std::string(to_string(s.sigma_mode));
  j["cohort"] = s.cohort_filtered ? "converted" : "all";
  j["complete"] = s.complete;
  auto stat = [](const MetricStat& m) {
    nlohmann::ordered_json o;
    o["mean"] = m.mean;
    o["two_sigma"] = m.two_sigma;
    return o;
  };
  j["auc"] = stat(s.auc);
  j["f1"] = stat(s.f1);
  j["accuracy"] = stat(s.accuracy);
  auto per_fold = nlohmann::ordered_json::array();
  for (const auto& f : s.folds) {
    nlohmann::ordered_json o;
    o["fold"] = f.fold;
    o["failed"] = f.failed;
    if (f.failed) o["error"] = f.error;
    o["train_count"] = f.train_count;
    o["test_count"] = f.test_count;
    o["auc"] = f.auc;
    o["f1"] = f.f1;
    o["accuracy"] = f.accuracy;
    per_fold.push_back(std::move(o));
  }
  j["per_fold"] = std::move(per_fold);
  return j;
}

MetricSummary metric_summary_from_json(const nlohmann::json& j) {
  try {
    MetricSummary s;
    const auto arch = parse_architecture(j.at("architecture").get<std::string>());
    if (!arch) throw DataError("metrics file names an unknown architecture");
    s.architecture = *arch;
    s.k = j.at("folds").get<int>();
    s.sigma_mode = parse_sigma_mode(j.at("sigma_mode").get<std::string>());
    s.cohort_filtered = j.at("cohort").get<std::string>() == "converted";
    s.complete = j.at("complete").get<bool>();
    auto stat = [&](const char* key) {
      return MetricStat{j.at(key).at("mean").get<double>(), j.at(key).at("two_sigma").get<double>()};
    };
    s.auc = stat("auc");
    s.f1 = stat("f1");
    s.accuracy = stat("accuracy");
    for (const auto& o : j.at("per_fold")) {
      FoldMetrics f;
      f.fold = o.at("fold").get<int>();
      f.failed = o.at("failed").get<bool>();
      if (f.failed) f.error = o.value("error", "");
      f.train_count = o.at("train_count").get<std::size_t>();
      f.test_count = o.at("test_count").get<std::size_t>();
      f.auc = o.at("auc").get<double>();
      f.f1 = o.at("f1").get<double>();
      f.accuracy = o.at("accuracy").get<double>();
      s.folds.push_back(std::move(f));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed metrics JSON: ") + e.what());
  }
}

std::string format_with_uncertainty(const MetricStat& stat, int decimals) {
  char spec[16];
  std::snprintf(spec, sizeof spec, "%%.%df", decimals);
  const long digits = std::lround(stat.two_sigma * std::pow(10.0, decimals));
  return fmt(spec, stat.mean) + "(" + std::to_string(digits) + ")";
}

std::string format_results_table(std::span<const MetricSummary> rows) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, display_name(r.architecture).size());
  std::ostringstream out;
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  out << pad("Model", width) << " | " << pad("AUC", 12) << " | " << pad("F1", 12) << " | Accuracy\n";
  out << std::string(width, '-') << "-+-" << std::string(12, '-') << "-+-" << std::string(12, '-') << "-+-"
      << std::string(12, '-') << '\n';
  for (const auto& r : rows) {
    out << pad(std::string(display_name(r.architecture)), width) << " | " << pad(format_with_uncertainty(r.auc), 12)
        << " | " << pad(format_with_uncertainty(r.f1), 12) << " | " << format_with_uncertainty(r.accuracy);
    if (!r.complete) out << "  (incomplete)";
    out << '\n';
  }
  if (!rows.empty())
    out << "Two-sigma (" << to_string(rows.front().sigma_mode) << ") in parentheses, in units of the last digit.\n";
  return out.str();
}

void write_roc_svg(std::span<const RocSeries> series, const std::filesystem::path& path) {
  static constexpr const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                            "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const double size = 400.0, margin = 50.0;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * margin + 180 << "\" height=\""
      << size + 2 * margin << "\">\n";
  out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\"" << size
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin + size << "\" x2=\"" << margin + size << "\" y2=\"" << margin
      << "\" stroke=\"#bbb\" stroke-dasharray=\"4\"/>\n";
  out << "<text x=\"" << margin + size / 2 << "\" y=\"" << size + margin + 35
      << "\" text-anchor=\"middle\">False positive rate</text>\n";
  out << "<text x=\"15\" y=\"" << margin + size / 2 << "\" transform=\"rotate(-90 15 " << margin + size / 2
      << ")\" text-anchor=\"middle\">True positive rate</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const auto& p : series[s].points)
      out << fmt("%.2f", margin + p.fpr * size) << ',' << fmt("%.2f", margin + size - p.tpr * size) << ' ';
    out << "\"/>\n";
    const double y = margin + 15.0 + 18.0 * static_cast<double>(s);
    out << "<text x=\"" << margin + size + 15 << "\" y=\"" << y << "\" fill=\"" << color << "\">" << series[s].name
        << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace churn
