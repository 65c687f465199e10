#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rvar/features.hpp"
#include "rvar/forest.hpp"

namespace rvar {

// Scalar model output being explained.
using ModelFn = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;

inline constexpr std::size_t kDefaultBackground = 64;
inline constexpr std::size_t kDefaultPermutations = 128;
inline constexpr std::size_t kMaxExactFeatures = 12;

struct ShapleyReport {
  std::string instance_id;
  std::size_t target_class = 0;
  std::vector<std::string> feature_names;
  Eigen::VectorXd feature_values;
  Eigen::VectorXd values;  // probability units
  double baseline = 0.0;   // mean model output over the background
  double fx = 0.0;
  std::size_t n_permutations = 0;  // 0 for exact enumeration

  double efficiency_gap() const { return values.sum() - (fx - baseline); }
};

// Interventional Shapley values of f at x against background rows. Every
// sampled permutation is walked from every background row, so the estimate
// satisfies efficiency exactly up to rounding.
ShapleyReport shapley_sampled(const ModelFn& f, const Eigen::VectorXd& x, const Eigen::MatrixXd& background,
                              std::size_t n_permutations, std::uint64_t seed);

// Enumerates all 2^d coalitions. TooManyFeatures when d > 12.
ShapleyReport exact_shapley(const ModelFn& f, const Eigen::VectorXd& x, const Eigen::MatrixXd& background);

// Probability of `target_class` under the classifier. SchemaMismatch when the
// vector or background width differs from the model schema.
ShapleyReport shapley_sampled(const TreeEnsembleClassifier& model, const FeatureVector& fv, std::size_t target_class,
                              const Eigen::MatrixXd& background, std::size_t n_permutations = kDefaultPermutations,
                              std::uint64_t seed = 0);
ShapleyReport exact_shapley(const TreeEnsembleClassifier& model, const FeatureVector& fv, std::size_t target_class,
                            const Eigen::MatrixXd& background);

// Up to `n` rows drawn without replacement, in draw order.
Eigen::MatrixXd sample_background(const Eigen::MatrixXd& rows, std::size_t n, std::uint64_t seed);

// (feature value, Shapley value) of `feature` for every row of `instances`.
std::vector<std::pair<double, double>> shap_summary(const TreeEnsembleClassifier& model,
                                                    const Eigen::MatrixXd& instances, std::string_view feature,
                                                    std::size_t target_class, const Eigen::MatrixXd& background,
                                                    std::size_t n_permutations = kDefaultPermutations,
                                                    std::uint64_t seed = 0);

// Header: instance_id,feature,feature_value,shapley_value,class
std::string shapley_to_csv(const std::vector<ShapleyReport>& reports);

double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace rvar
