#include "churn/forest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "churn/errors.hpp"
#include "churn/rng.hpp"

namespace churn {
namespace {

double gini(double positives, double total) {
  if (total <= 0.0) return 0.0;
  const double p = positives / total;
  return 2.0 * p * (1.0 - p);
}

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double decrease = -1.0;
};

class TreeBuilder {
 public:
  TreeBuilder(std::span<const double> x, std::size_t d, std::span<const int> y,
              const ForestConfig& cfg, Rng& rng)
      : x_(x), d_(d), y_(y), cfg_(cfg), rng_(rng), max_features_(cfg.resolved_max_features(d)),
        importance_(d, 0.0) {}

  DecisionTree build(std::vector<double> weights) {
    weights_ = std::move(weights);
    samples_.clear();
    for (std::size_t i = 0; i < weights_.size(); ++i)
      if (weights_[i] > 0.0) samples_.push_back(i);
    features_.resize(d_);
    std::iota(features_.begin(), features_.end(), 0);
    tree_.nodes.clear();
    grow(0, samples_.size(), 0);
    return std::move(tree_);
  }

  std::vector<double> take_importance() { return std::move(importance_); }

 private:
  int grow(std::size_t begin, std::size_t end, int depth) {
    double total = 0.0, positives = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      const double w = weights_[samples_[k]];
      total += w;
      positives += w * y_[samples_[k]];
    }
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    tree_.nodes[id].value = total > 0.0 ? positives / total : 0.0;
    tree_.nodes[id].weight = total;

    const bool pure = positives <= 0.0 || positives >= total;
    const bool too_small = total < static_cast<double>(cfg_.min_samples_split);
    const bool too_deep = cfg_.max_depth > 0 && depth >= cfg_.max_depth;
    if (pure || too_small || too_deep) return id;

    const Split split = find_split(begin, end, total, positives);
    if (split.feature < 0) return id;

    auto mid_it = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                 samples_.begin() + static_cast<std::ptrdiff_t>(end),
                                 [&](std::size_t s) { return value(s, split.feature) <= split.threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - samples_.begin());
    importance_[static_cast<std::size_t>(split.feature)] += split.decrease;
    tree_.nodes[id].feature = split.feature;
    tree_.nodes[id].threshold = split.threshold;
    const int left = grow(begin, mid, depth + 1);
    const int right = grow(mid, end, depth + 1);
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  double value(std::size_t sample, int feature) const {
    return x_[sample * d_ + static_cast<std::size_t>(feature)];
  }

  Split find_split(std::size_t begin, std::size_t end, double total, double positives) {
    Split best;
    const double parent = total * gini(positives, total);
    int visited = 0;
    // Lazy Fisher-Yates over the feature list; constant features do not count
    // towards max_features.
    for (std::size_t f = 0; f < d_ && visited < max_features_; ++f) {
      const std::size_t pick = f + rng_.below(d_ - f);
      std::swap(features_[f], features_[pick]);
      const int feature = static_cast<int>(features_[f]);

      pairs_.clear();
      double lo = INFINITY, hi = -INFINITY;
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t s = samples_[k];
        const double v = value(s, feature);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        pairs_.push_back({v, s});
      }
      if (!(hi > lo)) continue;
      ++visited;
      std::sort(pairs_.begin(), pairs_.end());
      double left_total = 0.0, left_pos = 0.0;
      for (std::size_t k = 0; k + 1 < pairs_.size(); ++k) {
        const double w = weights_[pairs_[k].second];
        left_total += w;
        left_pos += w * y_[pairs_[k].second];
        const double a = pairs_[k].first;
        const double b = pairs_[k + 1].first;
        if (!(b > a)) continue;
        const double right_total = total - left_total;
        const double right_pos = positives - left_pos;
        const double decrease =
            parent - left_total * gini(left_pos, left_total) - right_total * gini(right_pos, right_total);
        if (decrease > best.decrease) {
          best.decrease = decrease;
          best.feature = feature;
          double t = a + (b - a) / 2.0;
          if (!(t < b)) t = a;
          best.threshold = t;
        }
      }
    }
    if (best.feature >= 0 && best.decrease < 0.0) best.decrease = 0.0;
    return best;
  }

  std::span<const double> x_;
  std::size_t d_;
  std::span<const int> y_;
  const ForestConfig& cfg_;
  Rng& rng_;
  int max_features_;
  std::vector<double> weights_;
  std::vector<std::size_t> samples_;
  std::vector<std::size_t> features_;
  std::vector<std::pair<double, std::size_t>> pairs_;
  std::vector<double> importance_;
  DecisionTree tree_;
};

}  // namespace

void ForestConfig::validate(std::size_t n_features) const {
  if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
  if (max_features < 0 || static_cast<std::size_t>(max_features) > n_features)
    throw ConfigError("max_features must lie in [1, d] (0 selects sqrt(d))");
  if (min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
  if (max_depth < 0) throw ConfigError("max_depth must be >= 0");
}

int ForestConfig::resolved_max_features(std::size_t n_features) const {
  if (max_features > 0) return max_features;
  return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n_features)))));
}

double DecisionTree::predict(std::span<const double> x) const {
  int node = 0;
  while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(node)];
    node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

int DecisionTree::depth() const {
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    auto [node, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const auto& n = nodes[static_cast<std::size_t>(node)];
    if (!n.is_leaf()) {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return deepest;
}

RandomForest RandomForest::fit(std::span<const double> features, std::size_t n_features,
                               std::span<const int> labels, const ForestConfig& cfg) {
  cfg.validate(n_features);
  const std::size_t n = labels.size();
  if (n_features == 0 || features.size() != n * n_features)
    throw ContractError("RandomForest::fit: feature matrix shape mismatch");
  if (n < 2) throw ContractError("RandomForest::fit: need at least 2 samples");
  RandomForest forest;
  forest.n_features_ = n_features;
  for (int t = 0; t < cfg.n_trees; ++t) {
    Rng rng(cfg.seed, static_cast<std::uint64_t>(t));
    std::vector<double> weights(n, cfg.bootstrap ? 0.0 : 1.0);
    if (cfg.bootstrap)
      for (std::size_t k = 0; k < n; ++k) weights[rng.below(n)] += 1.0;
    TreeBuilder builder(features, n_features, labels, cfg, rng);
    forest.trees_.push_back(builder.build(std::move(weights)));
    forest.tree_importances_.push_back(builder.take_importance());
  }
  return forest;
}

double RandomForest::predict(std::span<const double> x) const {
  if (x.size() != n_features_) throw ContractError("RandomForest::predict: dimension mismatch");
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree.predict(x);
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> RandomForest::feature_importances() const {
  std::vector<double> total(n_features_, 0.0);
  for (const auto& raw : tree_importances_) {
    const double s = std::accumulate(raw.begin(), raw.end(), 0.0);
    if (s <= 0.0) continue;
    for (std::size_t f = 0; f < n_features_; ++f) total[f] += raw[f] / s;
  }
  const double s = std::accumulate(total.begin(), total.end(), 0.0);
  if (s > 0.0)
    for (double& v : total) v /= s;
  return total;
}

std::vector<RankedFeature> RandomForest::feature_importance(std::span<const std::string> names) const {
  if (names.size() != n_features_) throw ContractError("feature_importance: name count mismatch");
  const auto imp = feature_importances();
  std::vector<int> order(n_features_);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return imp[static_cast<std::size_t>(a)] > imp[static_cast<std::size_t>(b)];
  });
  std::vector<RankedFeature> ranked;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto f = static_cast<std::size_t>(order[r]);
    ranked.push_back({static_cast<int>(r + 1), order[r], names[f], imp[f]});
  }
  return ranked;
}

RandomForest RandomForest::from_parts(std::size_t n_features, std::vector<DecisionTree> trees,
                                      std::vector<std::vector<double>> tree_importances) {
  if (trees.size() != tree_importances.size()) throw DataError("forest: tree/importance count mismatch");
  RandomForest f;
  f.n_features_ = n_features;
  f.trees_ = std::move(trees);
  f.tree_importances_ = std::move(tree_importances);
  return f;
}

void write_importance_csv(std::span<const RankedFeature> ranked, std::ostream& out) {
  out << "rank,feature,importance\n";
  char buf[32];
  for (const auto& r : ranked) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), r.importance);
    out << r.rank << ',' << r.name << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf)) << '\n';
  }
}

void write_importance_csv(std::span<const RankedFeature> ranked, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_importance_csv(ranked, out);
}

}  // namespace churn
