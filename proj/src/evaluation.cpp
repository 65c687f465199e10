#include "rvar/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "rvar/error.hpp"

namespace rvar {

namespace {

void sort_points(std::vector<WeightedPoint>& p) {
  std::sort(p.begin(), p.end(), [](const WeightedPoint& a, const WeightedPoint& b) { return a.x < b.x; });
}

double total_weight(const std::vector<WeightedPoint>& p) {
  double t = 0.0;
  for (const auto& q : p) t += q.w;
  return t;
}

}  // namespace

double ks_distance(std::vector<WeightedPoint> a, std::vector<WeightedPoint> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::kEmptySample, "KS distance of an empty sample");
  sort_points(a);
  sort_points(b);
  const double wa = total_weight(a), wb = total_weight(b);
  double fa = 0.0, fb = 0.0, best = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    const double x = j >= b.size() || (i < a.size() && a[i].x <= b[j].x) ? a[i].x : b[j].x;
    while (i < a.size() && a[i].x == x) fa += a[i++].w;
    while (j < b.size() && b[j].x == x) fb += b[j++].w;
    best = std::max(best, std::abs(fa / wa - fb / wb));
  }
  return best;
}

double weighted_quantile(std::vector<WeightedPoint> points, double q) {
  if (points.empty()) throw Error(ErrorCode::kEmptySample, "quantile of an empty sample");
  sort_points(points);
  const double target = q * total_weight(points);
  double acc = 0.0;
  for (const auto& p : points) {
    acc += p.w;
    if (acc >= target * (1.0 - 1e-12)) return p.x;
  }
  return points.back().x;
}

double qq_mae(const std::vector<WeightedPoint>& a, const std::vector<WeightedPoint>& b) {
  auto sa = a, sb = b;
  sort_points(sa);
  sort_points(sb);
  const double wa = total_weight(sa), wb = total_weight(sb);
  // Single sweep per sample over the 99 increasing targets.
  auto quantiles = [](const std::vector<WeightedPoint>& s, double w) {
    std::vector<double> out;
    std::size_t i = 0;
    double acc = s.empty() ? 0.0 : s[0].w;
    for (int p = 1; p <= 99; ++p) {
      const double target = (p / 100.0) * w * (1.0 - 1e-12);
      while (acc < target && i + 1 < s.size()) acc += s[++i].w;
      out.push_back(s[i].x);
    }
    return out;
  };
  if (sa.empty() || sb.empty()) throw Error(ErrorCode::kEmptySample, "QQ comparison of an empty sample");
  const auto qa = quantiles(sa, wa), qb = quantiles(sb, wb);
  double sum = 0.0;
  for (std::size_t i = 0; i < qa.size(); ++i) sum += std::abs(qa[i] - qb[i]);
  return sum / static_cast<double>(qa.size());
}

std::vector<WeightedPoint> centroid_runtime_distribution(const ShapeModel& model, std::size_t cluster, double median,
                                                         double weight) {
  const auto& spec = model.spec;
  const auto& stats = model.stats.at(cluster);
  std::vector<WeightedPoint> out;
  for (std::size_t h = 0; h < spec.bins(); ++h) {
    const double mass = model.centroids(static_cast<Eigen::Index>(cluster), static_cast<Eigen::Index>(h));
    if (!(mass > 0.0)) continue;
    double v;
    if (h == spec.upper_outlier()) v = stats.upper_tail_mean;
    else if (spec.has_lower_outlier() && h == 0) v = stats.lower_tail_mean;
    else v = spec.bin_center(h);
    out.push_back({std::max(0.0, denormalize(v, median, spec.mode)), mass * weight});
  }
  return out;
}

std::vector<OccurrenceBucket> occurrence_buckets() {
  return {{"1-5", 1, 5}, {"6-10", 6, 10}, {"11-15", 11, 15}, {"16-50", 16, 50}, {"51+", 51, 0}};
}

EvalReport evaluate(const TreeEnsembleClassifier& classifier, const RegressionForest& regression,
                    const ShapeModel& shape_model, const LabeledSet& test) {
  if (test.size() == 0) throw Error(ErrorCode::kEmptyTest, "test set is empty");
  if (!(test.schema == classifier.schema()) || !(test.schema == regression.schema())) {
    throw Error(ErrorCode::kSchemaMismatch, "test schema differs from the model schema");
  }
  const auto k = static_cast<Eigen::Index>(shape_model.k);
  if (classifier.n_classes() != shape_model.k) {
    throw Error(ErrorCode::kSchemaMismatch, "classifier classes differ from the shape model's k");
  }

  EvalReport report;
  report.n_test = test.size();
  report.confusion_counts = Eigen::MatrixXd::Zero(k, k);
  report.accuracy_by_occurrence = occurrence_buckets();
  std::vector<std::size_t> bucket_correct(report.accuracy_by_occurrence.size(), 0);

  std::vector<WeightedPoint> actual, by_class, by_regression;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < test.size(); ++r) {
    const Eigen::VectorXd x = test.features.row(static_cast<Eigen::Index>(r)).transpose();
    const auto predicted = classifier.predict(x);
    const auto label = test.labels[r];
    const bool hit = predicted == label;
    correct += hit;
    report.confusion_counts(static_cast<Eigen::Index>(label), static_cast<Eigen::Index>(predicted)) += 1.0;
    report.predictions.push_back({test.rows[r].instance_id, label, predicted});

    for (std::size_t b = 0; b < report.accuracy_by_occurrence.size(); ++b) {
      auto& bucket = report.accuracy_by_occurrence[b];
      const auto occ = test.rows[r].occurrences;
      if (occ >= bucket.lo && (bucket.hi == 0 || occ <= bucket.hi)) {
        ++bucket.count;
        bucket_correct[b] += hit;
        break;
      }
    }

    const double median = test.rows[r].historic_median;
    if (std::isfinite(median) && median > 0.0) {
      ++report.n_distribution_rows;
      actual.push_back({test.rows[r].runtime, 1.0});
      by_regression.push_back({regression.predict(x), 1.0});
      auto dist = centroid_runtime_distribution(shape_model, predicted, median);
      by_class.insert(by_class.end(), dist.begin(), dist.end());
    }
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  for (std::size_t b = 0; b < bucket_correct.size(); ++b) {
    auto& bucket = report.accuracy_by_occurrence[b];
    bucket.accuracy = bucket.count ? static_cast<double>(bucket_correct[b]) / static_cast<double>(bucket.count) : 0.0;
  }
  report.confusion = report.confusion_counts;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double row = report.confusion.row(i).sum();
    if (row > 0.0) report.confusion.row(i) /= row;
  }

  const auto imp = gini_importance(classifier);
  for (std::size_t f = 0; f < classifier.schema().size(); ++f) {
    report.gini_importance.emplace_back(classifier.schema().name(f), imp[static_cast<Eigen::Index>(f)]);
  }

  if (!actual.empty()) {
    report.classification = {qq_mae(by_class, actual), ks_distance(by_class, actual)};
    report.regression = {qq_mae(by_regression, actual), ks_distance(by_regression, actual)};
  }
  return report;
}

std::string format_eval_report(const EvalReport& report) {
  std::string out;
  char buf[200];
  std::snprintf(buf, sizeof buf, "test instances: %zu\naccuracy: %.4f\n", report.n_test, report.accuracy);
  out += buf;
  out += "confusion (rows = actual, cols = predicted, row-normalized):\n";
  for (Eigen::Index i = 0; i < report.confusion.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "  %2ld |", static_cast<long>(i));
    out += buf;
    for (Eigen::Index j = 0; j < report.confusion.cols(); ++j) {
      std::snprintf(buf, sizeof buf, " %6.3f", report.confusion(i, j));
      out += buf;
    }
    out += '\n';
  }
  out += "accuracy by occurrences:\n";
  for (const auto& b : report.accuracy_by_occurrence) {
    std::snprintf(buf, sizeof buf, "  %-6s count %7zu  accuracy %.4f\n", b.name.c_str(), b.count, b.accuracy);
    out += buf;
  }
  std::snprintf(buf, sizeof buf,
                "distribution fit over %zu jobs:\n  classification  qq_mae %.3f s  ks %.4f\n"
                "  regression      qq_mae %.3f s  ks %.4f\n",
                report.n_distribution_rows, report.classification.qq_mae, report.classification.ks,
                report.regression.qq_mae, report.regression.ks);
  out += buf;
  auto ranked = report.gini_importance;
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  out += "top features by Gini importance:\n";
  for (std::size_t i = 0; i < std::min<std::size_t>(10, ranked.size()); ++i) {
    std::snprintf(buf, sizeof buf, "  %-36s %.4f\n", ranked[i].first.c_str(), ranked[i].second);
    out += buf;
  }
  return out;
}

}  // namespace rvar
