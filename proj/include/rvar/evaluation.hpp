#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rvar/clustering.hpp"
#include "rvar/features.hpp"
#include "rvar/forest.hpp"

namespace rvar {

struct WeightedPoint {
  double x = 0.0;
  double w = 0.0;
};

// Sup-norm distance between the CDFs of two weighted discrete samples
// (weights need not be normalized).
double ks_distance(std::vector<WeightedPoint> a, std::vector<WeightedPoint> b);

// Smallest x with CDF(x) >= q, for q in (0, 1].
double weighted_quantile(std::vector<WeightedPoint> points, double q);

// Mean |Q_a(p) - Q_b(p)| over p = 1%..99%.
double qq_mae(const std::vector<WeightedPoint>& a, const std::vector<WeightedPoint>& b);

// Predicted runtime distribution of one job: the centroid PMF of `cluster`
// mapped back to seconds through the job's historic median.
std::vector<WeightedPoint> centroid_runtime_distribution(const ShapeModel& model, std::size_t cluster,
                                                         double median, double weight = 1.0);

struct OccurrenceBucket {
  std::string name;  // "1-5", ..., "51+"
  std::size_t lo = 0;
  std::size_t hi = 0;  // inclusive; 0 = unbounded
  std::size_t count = 0;
  double accuracy = 0.0;
};

struct DistributionFit {
  double qq_mae = 0.0;  // seconds
  double ks = 0.0;
};

struct PredictionRecord {
  std::string instance_id;
  std::size_t label = 0;
  std::size_t predicted = 0;
};

struct EvalReport {
  std::size_t n_test = 0;
  double accuracy = 0.0;
  Eigen::MatrixXd confusion_counts;  // rows = actual label, cols = predicted
  Eigen::MatrixXd confusion;         // row-normalized; empty rows stay zero
  std::vector<OccurrenceBucket> accuracy_by_occurrence;
  std::vector<std::pair<std::string, double>> gini_importance;
  std::size_t n_distribution_rows = 0;  // test rows with a historic median
  DistributionFit classification;
  DistributionFit regression;
  std::vector<PredictionRecord> predictions;
};

std::vector<OccurrenceBucket> occurrence_buckets();

EvalReport evaluate(const TreeEnsembleClassifier& classifier, const RegressionForest& regression,
                    const ShapeModel& shape_model, const LabeledSet& test);

std::string format_eval_report(const EvalReport& report);

}  // namespace rvar
