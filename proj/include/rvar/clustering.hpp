#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rvar/distribution.hpp"

namespace rvar {

inline constexpr double kCentroidFloor = 1e-6;

// Posterior log-likelihood of each cluster up to a shared constant: the dot
// product of the observation PMF with each row of log centroids.
template <typename LogCentroids, typename Phi>
Eigen::Matrix<typename LogCentroids::Scalar, Eigen::Dynamic, 1> log_likelihood_scores(
    const Eigen::MatrixBase<LogCentroids>& log_centroids, const Eigen::MatrixBase<Phi>& phi) {
  return log_centroids * phi;
}

// Floors every entry at `floor`, renormalizes each row to 1 and takes logs.
template <typename Centroids>
Eigen::Matrix<typename Centroids::Scalar, Eigen::Dynamic, Eigen::Dynamic> floored_log(
    const Eigen::MatrixBase<Centroids>& centroids, typename Centroids::Scalar floor = kCentroidFloor) {
  using Scalar = typename Centroids::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = centroids.cwiseMax(floor);
  out.array().colwise() /= out.rowwise().sum().array();
  return out.array().log().matrix();
}

// Index of the maximum entry; ties resolve to the lowest index.
template <typename Derived>
Eigen::Index argmax_lowest(const Eigen::MatrixBase<Derived>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

struct ClusterStats {
  double outlier_pct = 0.0;
  double iqr_25_75 = 0.0;
  double p95 = 0.0;
  double std = 0.0;
  double job_share = 0.0;  // fraction of pooled observations
  std::size_t n_groups = 0;
  // Mean normalized value inside each outlier bin; locates the bin's mass when
  // a centroid is mapped back to runtimes.
  double upper_tail_mean = 0.0;
  double lower_tail_mean = 0.0;
};

struct ShapeModel {
  static constexpr int kVersion = 1;

  BinningSpec spec;
  std::size_t k = 0;
  Eigen::MatrixXd centroids;      // k x H, rows are PMFs
  Eigen::MatrixXd log_centroids;  // floored_log(centroids)
  std::vector<ClusterStats> stats;
  std::vector<std::size_t> cluster_order;  // cluster ids ranked by iqr ascending

  std::uint64_t fingerprint() const;
};

struct MembershipLabel {
  std::size_t cluster_id = 0;
  Eigen::VectorXd log_likelihoods;
  std::size_t n_samples = 0;
};

struct KMeansOptions {
  std::size_t k = 8;
  std::uint64_t seed = 0;
  std::size_t max_iter = 300;
  double tol = 1e-6;
  std::size_t n_init = 5;
};

// Raw Lloyd's algorithm with k-means++ seeding on the rows of `points`.
struct KMeansResult {
  Eigen::MatrixXd centroids;
  std::vector<std::size_t> labels;
  double inertia = 0.0;
  // Inertia after every assignment step, one trace per restart.
  std::vector<std::vector<double>> traces;
};

KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options);

// One clustering input: a group's smoothed PMF plus the normalized values it
// was built from (pooled per cluster for the statistics).
struct ClusterSample {
  GroupPmf smoothed;
  std::vector<double> values;
};

struct ShapeFit {
  ShapeModel model;
  std::vector<std::size_t> assignments;  // relabeled cluster of each sample
  double inertia = 0.0;
  std::vector<std::vector<double>> traces;
};

ShapeFit kmeans_fit(std::span<const ClusterSample> samples, const KMeansOptions& options);

// Best-of-n_init inertia for each k in [k_min, k_max].
std::vector<std::pair<std::size_t, double>> inertia_curve(std::span<const GroupPmf> pmfs, std::size_t k_min,
                                                          std::size_t k_max, std::uint64_t seed,
                                                          std::size_t n_init = 5);

// k with the largest second difference of the curve (interior points only).
std::size_t elbow_k(std::span<const std::pair<std::size_t, double>> curve);

MembershipLabel assign_membership(const GroupPmf& pmf, const ShapeModel& model);

struct ClusterReportRow {
  std::size_t cluster_id = 0;
  double job_pct = 0.0;
  double outlier_pct = 0.0;  // percent
  double iqr_25_75 = 0.0;
  double p95 = 0.0;
  double std = 0.0;
};

std::vector<ClusterReportRow> cluster_report(const ShapeModel& model);
std::string format_cluster_report(const ShapeModel& model);

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b);

// Builds the model's statistics and ordering from centroids and member values.
// Exposed so callers that already hold an assignment can reuse it.
ShapeModel make_shape_model(const BinningSpec& spec, const Eigen::MatrixXd& centroids,
                            std::span<const std::size_t> labels, std::span<const ClusterSample> samples,
                            std::vector<std::size_t>* relabel = nullptr);

}  // namespace rvar
