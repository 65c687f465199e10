#include "rvar/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>

#include "rvar/error.hpp"

namespace rvar {

std::uint64_t ShapeModel::fingerprint() const {
  Fnv1a h;
  h.u64(spec.fingerprint()).u64(k).u64(static_cast<std::uint64_t>(centroids.cols()));
  for (Eigen::Index i = 0; i < centroids.rows(); ++i) {
    for (Eigen::Index j = 0; j < centroids.cols(); ++j) {
      const double v = centroids(i, j);
      h.bytes(&v, sizeof v);
    }
  }
  return h.value();
}

namespace {

Eigen::MatrixXd kmeans_plus_plus(const Eigen::MatrixXd& points, std::size_t k, std::mt19937_64& rng) {
  const auto n = points.rows();
  Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), points.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  centers.row(0) = points.row(pick(rng));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (points.row(i) - centers.row(0)).squaredNorm();

  for (std::size_t c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
      // Floating round-off can leave `chosen` on an existing centre.
      while (d2[chosen] == 0.0 && chosen > 0) --chosen;
    } else {
      chosen = pick(rng);
    }
    centers.row(static_cast<Eigen::Index>(c)) = points.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm());
    }
  }
  return centers;
}

// Nearest centre per point (lowest id on ties); returns inertia.
double assign_points(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers, std::vector<std::size_t>& labels,
                     Eigen::VectorXd& dist) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Eigen::Index best = 0;
    double best_d = (points.row(i) - centers.row(0)).squaredNorm();
    for (Eigen::Index c = 1; c < centers.rows(); ++c) {
      const double d = (points.row(i) - centers.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
    dist[i] = best_d;
    inertia += best_d;
  }
  return inertia;
}

void update_centers(const Eigen::MatrixXd& points, const std::vector<std::size_t>& labels, Eigen::MatrixXd& centers) {
  const auto k = centers.rows();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    sums.row(static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)])) += points.row(i);
    ++counts[labels[static_cast<std::size_t>(i)]];
  }
  std::vector<bool> taken(static_cast<std::size_t>(points.rows()), false);
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) {
      centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
  }
  // Empty clusters restart at the point farthest from its own centre.
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    Eigen::Index far = -1;
    double far_d = -1.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      const double d =
          (points.row(i) - centers.row(static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]))).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far >= 0) {
      centers.row(c) = points.row(far);
      taken[static_cast<std::size_t>(far)] = true;
    }
  }
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (options.k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (n < options.k) {
    throw Error(ErrorCode::kTooFewGroups,
                "need at least k=" + std::to_string(options.k) + " inputs, got " + std::to_string(n));
  }
  KMeansResult best;
  bool have_best = false;
  const std::size_t restarts = std::max<std::size_t>(1, options.n_init);
  for (std::size_t r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(mix_seed(options.seed, r));
    Eigen::MatrixXd centers = kmeans_plus_plus(points, options.k, rng);
    std::vector<std::size_t> labels(n, 0);
    Eigen::VectorXd dist(static_cast<Eigen::Index>(n));
    std::vector<double> trace;
    double inertia = assign_points(points, centers, labels, dist);
    trace.push_back(inertia);
    for (std::size_t it = 1; it < options.max_iter && inertia > 0.0; ++it) {
      update_centers(points, labels, centers);
      const double next = assign_points(points, centers, labels, dist);
      trace.push_back(next);
      const double improvement = inertia - next;
      inertia = next;
      if (improvement < options.tol * trace[trace.size() - 2]) break;
    }
    best.traces.push_back(trace);
    if (!have_best || inertia < best.inertia) {
      best.centroids = centers;
      best.labels = labels;
      best.inertia = inertia;
      have_best = true;
    }
  }
  return best;
}

namespace {

ClusterStats pooled_stats(const std::vector<double>& values, const BinningSpec& spec) {
  ClusterStats s;
  if (values.empty()) return s;
  if (values.size() == 1) {
    s.outlier_pct = spec.is_upper_outlier(values[0]) ? 1.0 : 0.0;
    s.p95 = values[0];
  } else {
    const auto d = distribution_stats(values, spec);
    s.outlier_pct = d.outlier_pct;
    s.iqr_25_75 = d.iqr_25_75;
    s.p95 = d.p95;
    s.std = d.std;
  }
  double upper = 0.0, lower = 0.0;
  std::size_t n_upper = 0, n_lower = 0;
  for (double v : values) {
    if (spec.is_upper_outlier(v)) {
      upper += v;
      ++n_upper;
    } else if (spec.has_lower_outlier() && v < spec.lo) {
      lower += v;
      ++n_lower;
    }
  }
  const double range = spec.hi - spec.lo;
  s.upper_tail_mean = n_upper ? upper / static_cast<double>(n_upper) : spec.hi + 0.25 * range;
  s.lower_tail_mean = n_lower ? lower / static_cast<double>(n_lower) : spec.lo - 0.25 * range;
  return s;
}

}  // namespace

ShapeModel make_shape_model(const BinningSpec& spec, const Eigen::MatrixXd& centroids,
                            std::span<const std::size_t> labels, std::span<const ClusterSample> samples,
                            std::vector<std::size_t>* relabel) {
  const auto k = static_cast<std::size_t>(centroids.rows());
  std::vector<std::vector<double>> pooled(k);
  std::vector<std::size_t> groups(k, 0);
  std::size_t total = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& dst = pooled[labels[i]];
    dst.insert(dst.end(), samples[i].values.begin(), samples[i].values.end());
    ++groups[labels[i]];
    total += samples[i].values.size();
  }

  std::vector<ClusterStats> stats(k);
  for (std::size_t c = 0; c < k; ++c) {
    stats[c] = pooled_stats(pooled[c], spec);
    stats[c].n_groups = groups[c];
    stats[c].job_share = total ? static_cast<double>(pooled[c].size()) / static_cast<double>(total) : 0.0;
  }

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return stats[a].iqr_25_75 < stats[b].iqr_25_75; });

  ShapeModel model;
  model.spec = spec;
  model.k = k;
  model.centroids.resize(centroids.rows(), centroids.cols());
  model.stats.resize(k);
  std::vector<std::size_t> new_id(k);
  for (std::size_t r = 0; r < k; ++r) {
    new_id[order[r]] = r;
    Eigen::VectorXd row = centroids.row(static_cast<Eigen::Index>(order[r])).transpose().cwiseMax(0.0);
    const double sum = row.sum();
    if (sum > 0.0) row /= sum;
    model.centroids.row(static_cast<Eigen::Index>(r)) = row.transpose();
    model.stats[r] = stats[order[r]];
  }
  model.log_centroids = floored_log(model.centroids);
  model.cluster_order.resize(k);
  std::iota(model.cluster_order.begin(), model.cluster_order.end(), 0);
  if (relabel) *relabel = new_id;
  return model;
}

ShapeFit kmeans_fit(std::span<const ClusterSample> samples, const KMeansOptions& options) {
  if (samples.size() < options.k || samples.empty()) {
    throw Error(ErrorCode::kTooFewGroups,
                "need at least k=" + std::to_string(options.k) + " groups, got " + std::to_string(samples.size()));
  }
  const auto& spec = samples.front().smoothed.spec;
  const auto h = static_cast<Eigen::Index>(spec.bins());
  Eigen::MatrixXd points(static_cast<Eigen::Index>(samples.size()), h);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i].smoothed.spec == spec)) throw Error(ErrorCode::kSpecMismatch, "all PMFs must share one binning");
    points.row(static_cast<Eigen::Index>(i)) = samples[i].smoothed.probs.transpose();
  }
  auto raw = kmeans(points, options);

  ShapeFit fit;
  std::vector<std::size_t> new_id;
  fit.model = make_shape_model(spec, raw.centroids, raw.labels, samples, &new_id);
  fit.assignments.resize(raw.labels.size());
  for (std::size_t i = 0; i < raw.labels.size(); ++i) fit.assignments[i] = new_id[raw.labels[i]];
  fit.inertia = raw.inertia;
  fit.traces = std::move(raw.traces);
  return fit;
}

std::vector<std::pair<std::size_t, double>> inertia_curve(std::span<const GroupPmf> pmfs, std::size_t k_min,
                                                          std::size_t k_max, std::uint64_t seed,
                                                          std::size_t n_init) {
  if (pmfs.empty()) throw Error(ErrorCode::kTooFewGroups, "no PMFs");
  if (k_min < 1 || k_min > k_max || k_max > pmfs.size()) {
    throw Error(ErrorCode::kInvalidArgument, "k range must lie within [1, number of PMFs]");
  }
  const auto& spec = pmfs.front().spec;
  Eigen::MatrixXd points(static_cast<Eigen::Index>(pmfs.size()), static_cast<Eigen::Index>(spec.bins()));
  for (std::size_t i = 0; i < pmfs.size(); ++i) {
    if (!(pmfs[i].spec == spec)) throw Error(ErrorCode::kSpecMismatch, "all PMFs must share one binning");
    points.row(static_cast<Eigen::Index>(i)) = pmfs[i].probs.transpose();
  }
  std::vector<std::pair<std::size_t, double>> curve;
  for (std::size_t k = k_min; k <= k_max; ++k) {
    KMeansOptions opt;
    opt.k = k;
    opt.seed = mix_seed(seed, k);
    opt.n_init = n_init;
    curve.emplace_back(k, kmeans(points, opt).inertia);
  }
  return curve;
}

std::size_t elbow_k(std::span<const std::pair<std::size_t, double>> curve) {
  if (curve.size() < 3) throw Error(ErrorCode::kInvalidArgument, "elbow needs at least three points");
  std::size_t best = curve[1].first;
  double best_d2 = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    const double d2 = curve[i - 1].second - 2.0 * curve[i].second + curve[i + 1].second;
    if (d2 > best_d2) {
      best_d2 = d2;
      best = curve[i].first;
    }
  }
  return best;
}

MembershipLabel assign_membership(const GroupPmf& pmf, const ShapeModel& model) {
  if (!(pmf.spec == model.spec)) throw Error(ErrorCode::kSpecMismatch, "PMF binning differs from the shape model");
  if (pmf.n_samples < 1) throw Error(ErrorCode::kEmptySample, "membership needs at least one observation");
  MembershipLabel label;
  label.log_likelihoods = log_likelihood_scores(model.log_centroids, pmf.probs);
  label.cluster_id = static_cast<std::size_t>(argmax_lowest(label.log_likelihoods));
  label.n_samples = pmf.n_samples;
  return label;
}

std::vector<ClusterReportRow> cluster_report(const ShapeModel& model) {
  std::vector<ClusterReportRow> rows;
  for (auto id : model.cluster_order) {
    const auto& s = model.stats[id];
    rows.push_back({id, 100.0 * s.job_share, 100.0 * s.outlier_pct, s.iqr_25_75, s.p95, s.std});
  }
  return rows;
}

std::string format_cluster_report(const ShapeModel& model) {
  const bool delta = model.spec.mode == NormalizationMode::kDelta;
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-4s %8s %12s %12s %12s %12s\n", "cid", "% jobs", "outlier (%)",
                delta ? "25-75th (s)" : "25-75th", delta ? "95th (s)" : "95th", delta ? "std (s)" : "std");
  out += buf;
  for (const auto& r : cluster_report(model)) {
    std::snprintf(buf, sizeof buf, "%-4zu %8.2f %12.2f %12.2f %12.2f %12.2f\n", r.cluster_id, r.job_pct,
                  r.outlier_pct, r.iqr_25_75, r.p95, r.std);
    out += buf;
  }
  return out;
}

double adjusted_rand_index(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kInvalidArgument, "label vectors differ in length");
  const double n = static_cast<double>(a.size());
  if (a.size() < 2) return 1.0;
  std::map<std::pair<std::size_t, std::size_t>, double> table;
  std::map<std::size_t, double> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [_, v] : table) index += c2(v);
  for (const auto& [_, v] : rows) sum_rows += c2(v);
  for (const auto& [_, v] : cols) sum_cols += c2(v);
  const double expected = sum_rows * sum_cols / c2(n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace rvar
