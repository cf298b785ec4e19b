#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace churn {

struct ForestConfig {
  int n_trees = 100;
  int max_features = 0;  // 0 selects floor(sqrt(d))
  int min_samples_split = 2;
  int max_depth = 0;  // 0 is unlimited
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate(std::size_t n_features) const;
  int resolved_max_features(std::size_t n_features) const;
  bool operator==(const ForestConfig&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // positive-class fraction of the node's (bootstrap) samples
  double weight = 0.0;  // bootstrap-weighted sample count

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
 public:
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const;
  int depth() const;
  bool operator==(const DecisionTree&) const = default;
};

struct RankedFeature {
  int rank = 0;  // 1-based
  int index = 0;
  std::string name;
  double importance = 0.0;
};

class RandomForest {
 public:
  RandomForest() = default;

  /// `features` is n x d row-major. Both classes need not be present; a
  /// single-class input yields single-leaf trees.
  static RandomForest fit(std::span<const double> features, std::size_t n_features,
                          std::span<const int> labels, const ForestConfig& cfg);

  /// Mean of the per-tree leaf fractions. Throws ContractError on a
  /// dimension mismatch.
  double predict(std::span<const double> x) const;

  const std::vector<DecisionTree>& trees() const { return trees_; }
  std::size_t n_features() const { return n_features_; }

  /// Mean decrease in Gini impurity per feature (weighted by node sample
  /// counts), normalized per tree, averaged, then normalized to sum to 1.
  std::vector<double> feature_importances() const;

  /// Descending importance; ties broken by feature index.
  std::vector<RankedFeature> feature_importance(std::span<const std::string> names) const;

  static RandomForest from_parts(std::size_t n_features, std::vector<DecisionTree> trees,
                                 std::vector<std::vector<double>> tree_importances);
  const std::vector<std::vector<double>>& tree_importances() const { return tree_importances_; }

  bool operator==(const RandomForest&) const = default;

 private:
  std::size_t n_features_ = 0;
  std::vector<DecisionTree> trees_;
  std::vector<std::vector<double>> tree_importances_;  // raw, per tree
};

/// CSV `rank,feature,importance`.
void write_importance_csv(std::span<const RankedFeature> ranked, std::ostream& out);
void write_importance_csv(std::span<const RankedFeature> ranked, const std::filesystem::path& path);

}  // namespace churn
