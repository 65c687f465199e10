#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rvar/distribution.hpp"
#include "rvar/telemetry.hpp"

namespace rvar {

// Scalar descriptors of a runtime sample. These are the baselines the
// distribution-shape approach replaces.
struct ScalarSummary {
  double mean = 0.0;
  double median = 0.0;  // lower median
  double cov = 0.0;     // population std / mean
  double p95 = 0.0;
  double outlier_rate = 0.0;  // share of samples beyond the spec's slow-tail threshold
};

ScalarSummary scalar_summary(std::span<const double> samples, const BinningSpec& spec = BinningSpec::ratio());

// Coefficient of variation with population std; 0 for a single sample.
double coefficient_of_variation(std::span<const double> samples);

enum class PairMetric { kMedian, kCov, kP95 };

PairMetric parse_pair_metric(std::string_view name);

struct MetricPair {
  double historic = 0.0;
  double future = 0.0;
};

// kMedian: one pair per future instance (historic median, runtime).
// kCov / kP95: one pair per group (metric over history, metric over future).
std::vector<MetricPair> historic_vs_future_pairs(const JobGroup& group, Timestamp split_time, PairMetric metric);

// "historic,future" header then one row per pair.
std::string pairs_to_csv(std::span<const MetricPair> pairs);

}  // namespace rvar
