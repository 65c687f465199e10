#include "rvar/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "rvar/error.hpp"

namespace rvar {

double coefficient_of_variation(std::span<const double> samples) {
  if (samples.empty()) throw Error(ErrorCode::kInsufficientSamples, "cov of an empty sample");
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  if (!(mean > 0.0)) return 0.0;
  return population_std(samples) / mean;
}

ScalarSummary scalar_summary(std::span<const double> samples, const BinningSpec& spec) {
  if (samples.size() < 2) throw Error(ErrorCode::kInsufficientSamples, "scalar summary needs >= 2 samples");
  for (double s : samples) {
    if (!(s > 0.0)) throw Error(ErrorCode::kInvalidArgument, "samples must be > 0");
  }
  ScalarSummary out;
  out.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  out.median = lower_median(samples);
  out.cov = coefficient_of_variation(samples);
  out.p95 = quantile(samples, 0.95);
  std::size_t outliers = 0;
  for (double s : samples) {
    if (spec.is_upper_outlier(normalize_runtime(s, out.median, spec.mode))) ++outliers;
  }
  out.outlier_rate = static_cast<double>(outliers) / static_cast<double>(samples.size());
  return out;
}

PairMetric parse_pair_metric(std::string_view name) {
  if (name == "median") return PairMetric::kMedian;
  if (name == "cov") return PairMetric::kCov;
  if (name == "p95") return PairMetric::kP95;
  throw Error(ErrorCode::kInvalidArgument, "unknown metric '" + std::string(name) + "'");
}

std::vector<MetricPair> historic_vs_future_pairs(const JobGroup& group, Timestamp split_time, PairMetric metric) {
  std::vector<double> past, future;
  for (const auto& job : group.instances) (job.submit_time < split_time ? past : future).push_back(job.runtime);
  if (past.empty()) throw Error(ErrorCode::kNoHistory, "group has no instance before the split");
  if (future.empty()) throw Error(ErrorCode::kNoFuture, "group has no instance after the split");

  std::vector<MetricPair> pairs;
  switch (metric) {
    case PairMetric::kMedian: {
      const double m = lower_median(past);
      for (double r : future) pairs.push_back({m, r});
      break;
    }
    case PairMetric::kCov:
      pairs.push_back({coefficient_of_variation(past), coefficient_of_variation(future)});
      break;
    case PairMetric::kP95:
      pairs.push_back({quantile(past, 0.95), quantile(future, 0.95)});
      break;
  }
  return pairs;
}

std::string pairs_to_csv(std::span<const MetricPair> pairs) {
  std::string out = "historic,future\n";
  char buf[64];
  for (const auto& p : pairs) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.historic, p.future);
    out += buf;
  }
  return out;
}

}  // namespace rvar
