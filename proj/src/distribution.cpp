#include "rvar/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rvar/error.hpp"

namespace rvar {

const char* to_string(NormalizationMode mode) { return mode == NormalizationMode::kRatio ? "ratio" : "delta"; }

NormalizationMode parse_normalization_mode(std::string_view name) {
  if (name == "ratio") return NormalizationMode::kRatio;
  if (name == "delta") return NormalizationMode::kDelta;
  throw Error(ErrorCode::kInvalidArgument, "unknown normalization mode '" + std::string(name) + "'");
}

void BinningSpec::validate() const {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw Error(ErrorCode::kConfig, "binning requires lo < hi");
  if (n_interior < 2) throw Error(ErrorCode::kConfig, "binning requires at least 2 interior bins");
}

std::uint64_t BinningSpec::fingerprint() const {
  Fnv1a h;
  h.str(to_string(mode)).bytes(&lo, sizeof lo).bytes(&hi, sizeof hi).u64(n_interior);
  return h.value();
}

std::size_t BinningSpec::bin_of(double v) const {
  if (is_upper_outlier(v)) return upper_outlier();
  if (v < lo) return has_lower_outlier() ? 0 : first_interior();
  auto idx = static_cast<std::size_t>(std::floor((v - lo) / width()));
  return first_interior() + std::min(idx, n_interior - 1);
}

double BinningSpec::bin_center(std::size_t bin) const {
  const auto i = static_cast<double>(bin - first_interior());
  return lo + (i + 0.5) * width();
}

double normalize_runtime(double runtime, double median, NormalizationMode mode) {
  if (!(median > 0.0)) throw Error(ErrorCode::kNonPositiveMedian, "median must be > 0");
  if (!(runtime > 0.0)) throw Error(ErrorCode::kInvalidArgument, "runtime must be > 0");
  return mode == NormalizationMode::kRatio ? runtime / median : runtime - median;
}

double denormalize(double value, double median, NormalizationMode mode) {
  return mode == NormalizationMode::kRatio ? value * median : value + median;
}

GroupPmf histogram(std::span<const double> values, const BinningSpec& spec) {
  spec.validate();
  if (values.empty()) throw Error(ErrorCode::kEmptySample, "histogram of an empty sample");
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.bins()));
  for (double v : values) counts[static_cast<Eigen::Index>(spec.bin_of(v))] += 1.0;
  GroupPmf pmf;
  pmf.spec = spec;
  pmf.probs = counts / static_cast<double>(values.size());
  pmf.n_samples = values.size();
  return pmf;
}

GroupPmf smooth(const GroupPmf& pmf) {
  const auto& spec = pmf.spec;
  const auto first = static_cast<Eigen::Index>(spec.first_interior());
  const auto n = static_cast<Eigen::Index>(spec.n_interior);
  const auto interior = pmf.probs.segment(first, n);

  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double acc = 0.5 * interior[i];
    double weight = 0.5;
    if (i > 0) {
      acc += 0.25 * interior[i - 1];
      weight += 0.25;
    }
    if (i + 1 < n) {
      acc += 0.25 * interior[i + 1];
      weight += 0.25;
    }
    out[i] = acc / weight;
  }
  const double before = interior.sum();
  const double after = out.sum();
  if (after > 0.0) out *= before / after;

  GroupPmf result = pmf;
  result.probs.segment(first, n) = out;
  return result;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::kInsufficientSamples, "quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto below = static_cast<std::size_t>(std::floor(pos));
  const auto above = std::min(below + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(below);
  return sorted[below] + frac * (sorted[above] - sorted[below]);
}

double quantile(std::span<const double> values, double q) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, q);
}

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

DistributionStats distribution_stats(std::span<const double> values, const BinningSpec& spec) {
  if (values.size() < 2) throw Error(ErrorCode::kInsufficientSamples, "distribution stats need >= 2 values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  DistributionStats s;
  const auto outliers = std::count_if(sorted.begin(), sorted.end(), [&](double v) { return spec.is_upper_outlier(v); });
  s.outlier_pct = static_cast<double>(outliers) / static_cast<double>(sorted.size());
  s.iqr_25_75 = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  s.p95 = quantile_sorted(sorted, 0.95);
  s.std = population_std(sorted);
  return s;
}

std::vector<double> normalized_runtimes(const JobGroup& group, double median, NormalizationMode mode) {
  std::vector<double> out;
  out.reserve(group.support());
  for (const auto& job : group.instances) out.push_back(normalize_runtime(job.runtime, median, mode));
  return out;
}

bool is_valid_pmf(const GroupPmf& pmf, double tol) {
  if (static_cast<std::size_t>(pmf.probs.size()) != pmf.spec.bins()) return false;
  if ((pmf.probs.array() < 0.0).any() || !pmf.probs.allFinite()) return false;
  return std::abs(pmf.probs.sum() - 1.0) <= tol;
}

}  // namespace rvar
