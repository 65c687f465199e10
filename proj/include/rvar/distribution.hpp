#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rvar/telemetry.hpp"

namespace rvar {

template <typename Scalar>
using Pmf = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

enum class NormalizationMode { kRatio, kDelta };

const char* to_string(NormalizationMode mode);
NormalizationMode parse_normalization_mode(std::string_view name);

// Histogram layout over normalized runtimes:
//   [lower outlier (Delta only)] [n_interior uniform bins over [lo, hi)] [upper outlier]
struct BinningSpec {
  NormalizationMode mode = NormalizationMode::kRatio;
  double lo = 0.0;
  double hi = 10.0;
  std::size_t n_interior = 200;

  static BinningSpec ratio(std::size_t n_interior = 200) { return {NormalizationMode::kRatio, 0.0, 10.0, n_interior}; }
  static BinningSpec delta(std::size_t n_interior = 200) {
    return {NormalizationMode::kDelta, -900.0, 900.0, n_interior};
  }
  static BinningSpec for_mode(NormalizationMode mode, std::size_t n_interior = 200) {
    return mode == NormalizationMode::kRatio ? ratio(n_interior) : delta(n_interior);
  }

  bool has_lower_outlier() const { return mode == NormalizationMode::kDelta; }
  std::size_t first_interior() const { return has_lower_outlier() ? 1 : 0; }
  std::size_t upper_outlier() const { return first_interior() + n_interior; }
  std::size_t bins() const { return n_interior + (has_lower_outlier() ? 2 : 1); }
  double width() const { return (hi - lo) / static_cast<double>(n_interior); }

  // Slow-tail threshold; shared by histogram() and distribution_stats().
  bool is_upper_outlier(double v) const { return v >= hi; }
  std::size_t bin_of(double v) const;
  // Centre of an interior bin, in normalized units.
  double bin_center(std::size_t bin) const;

  void validate() const;
  std::uint64_t fingerprint() const;

  bool operator==(const BinningSpec&) const = default;
};

struct GroupPmf {
  BinningSpec spec;
  Pmf<double> probs;  // length spec.bins(), sums to 1
  std::size_t n_samples = 0;
  std::optional<GroupKey> group_key;
};

double normalize_runtime(double runtime, double median, NormalizationMode mode);
// Inverse of normalize_runtime.
double denormalize(double value, double median, NormalizationMode mode);

GroupPmf histogram(std::span<const double> values, const BinningSpec& spec);

// [0.25, 0.5, 0.25] over interior bins with edge renormalization; outlier
// bins keep their mass bit-for-bit.
GroupPmf smooth(const GroupPmf& pmf);

struct DistributionStats {
  double outlier_pct = 0.0;  // fraction in [0,1] at or above the upper threshold
  double iqr_25_75 = 0.0;
  double p95 = 0.0;
  double std = 0.0;  // population

  bool operator==(const DistributionStats&) const = default;
};

DistributionStats distribution_stats(std::span<const double> values, const BinningSpec& spec);

// Linear interpolation between order statistics of an already sorted sample.
double quantile_sorted(std::span<const double> sorted, double q);
double quantile(std::span<const double> values, double q);
double population_std(std::span<const double> values);

// Normalized runtimes of `group` against `median`.
std::vector<double> normalized_runtimes(const JobGroup& group, double median, NormalizationMode mode);

// Fixed-point check used by tests: every invariant of a GroupPmf.
bool is_valid_pmf(const GroupPmf& pmf, double tol = 1e-9);

}  // namespace rvar
