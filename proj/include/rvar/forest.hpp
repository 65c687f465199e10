#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rvar/features.hpp"

namespace rvar {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  Eigen::VectorXd value;  // leaves only: class probabilities, or a single mean for regression
  double weighted_impurity_decrease = 0.0;  // N_t/N * (impurity - children), splits only
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const Eigen::VectorXd& leaf_value(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::vector<TreeNode>& nodes() { return nodes_; }
  std::size_t depth() const;

 private:
  std::vector<TreeNode> nodes_;
};

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 0;  // 0 = grow until pure or min_leaf
  std::size_t min_leaf = 1;
  // Fraction of features tried per split; 0 selects sqrt(d).
  double feature_subsample = 0.0;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  bool operator==(const ForestParams&) const = default;
};

// Bagged Gini-split decision trees; prediction is the mean of leaf vectors.
class TreeEnsembleClassifier {
 public:
  TreeEnsembleClassifier() = default;
  TreeEnsembleClassifier(FeatureSchema schema, std::size_t n_classes, ForestParams params,
                         std::vector<DecisionTree> trees);

  Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  std::size_t predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  const FeatureSchema& schema() const { return schema_; }
  std::size_t n_classes() const { return n_classes_; }
  const ForestParams& params() const { return params_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  // Features referenced by at least one split.
  std::vector<bool> used_features() const;

 private:
  FeatureSchema schema_;
  std::size_t n_classes_ = 0;
  ForestParams params_;
  std::vector<DecisionTree> trees_;
};

// Same trees with variance-reduction splits and mean leaves.
class RegressionForest {
 public:
  RegressionForest() = default;
  RegressionForest(FeatureSchema schema, ForestParams params, std::vector<DecisionTree> trees);

  double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  const FeatureSchema& schema() const { return schema_; }
  const ForestParams& params() const { return params_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

 private:
  FeatureSchema schema_;
  ForestParams params_;
  std::vector<DecisionTree> trees_;
};

// Throws DegenerateLabels when fewer than two classes are present.
TreeEnsembleClassifier train_classifier(const LabeledSet& train, std::size_t n_classes, const ForestParams& params);

RegressionForest train_regression_baseline(const LabeledSet& train, const ForestParams& params);

// Mean-decrease-in-impurity, normalized to sum 1 (all zeros when no tree splits).
Eigen::VectorXd gini_importance(const TreeEnsembleClassifier& model);

struct FeatureSelection {
  FeatureSchema schema;
  std::vector<std::size_t> kept;      // indices into the input schema
  Eigen::VectorXd first_importance;   // importances of the preliminary fit
  std::size_t rounds = 0;
};

inline constexpr double kCorrelationCutoff = 0.95;

// Repeats until stable: fit, drop features with importance below
// `threshold`, then from each pair with |Pearson r| > 0.95 drop the less
// important one.
FeatureSelection select_features(const LabeledSet& train, std::size_t n_classes, double threshold,
                                 const ForestParams& params);

double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

struct SweepResult {
  ForestParams best;
  std::vector<std::pair<ForestParams, double>> scores;  // validation accuracy per grid point
};

// Grid over {max_depth} x {min_leaf}; the latest `validation_fraction` of the
// training rows by submit time is held out for scoring.
SweepResult sweep_classifier(const LabeledSet& train, std::size_t n_classes, const ForestParams& base,
                             std::span<const std::size_t> depths = std::span<const std::size_t>{},
                             std::span<const std::size_t> min_leaves = std::span<const std::size_t>{},
                             double validation_fraction = 0.2);

}  // namespace rvar
