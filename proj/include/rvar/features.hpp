#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rvar/clustering.hpp"
#include "rvar/telemetry.hpp"

namespace rvar {

enum class FeatureKind { kIntrinsic, kResource, kEnvironment, kHistory };

const char* to_string(FeatureKind kind);

// Sentinel for a per-SKU utilization the job has no entry for.
inline constexpr double kMissingUtilization = -1.0;

// Ordered, named feature layout. A feature's meaning is fully determined by
// its name, e.g. "ops[Extract]", "sku_vertex_fraction[Gen5.2]", "runtime_hist_median".
class FeatureSchema {
 public:
  FeatureSchema() = default;
  // Throws SchemaError on unknown or duplicate names.
  explicit FeatureSchema(std::vector<std::string> names);

  // Every feature the dataset can populate: operator types and SKU names are
  // collected from all instances and sorted.
  static FeatureSchema for_dataset(const Dataset& dataset);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_[i]; }
  FeatureKind kind(std::size_t i) const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t require(std::string_view name) const;  // UnknownFeature if absent

  // SKU names appearing in sku_vertex_fraction[...] features, in schema order.
  std::vector<std::string> skus() const;

  FeatureSchema subset(const std::vector<std::size_t>& keep) const;
  std::uint64_t fingerprint() const;

  bool operator==(const FeatureSchema& other) const { return names_ == other.names_; }

  // Parsed form of one name; public so the extractor can switch on it.
  enum class Source {
    kOpCount,
    kVertexCount,
    kCardinality,
    kInputBytesMean,
    kInputBytesStd,
    kTempReadMean,
    kTempReadStd,
    kTokenAlloc,
    kTokenMinMean,
    kTokenMinStd,
    kTokenMaxMean,
    kTokenMaxStd,
    kTokenAvgMean,
    kTokenAvgStd,
    kSpareTokenMean,
    kSkuFraction,
    kCpuUtilMean,
    kCpuUtilStd,
    kPriorCount,
    kRuntimeMean,
    kRuntimeStd,
    kRuntimeMedian,
  };
  struct Entry {
    Source source;
    std::string key;  // operator type or SKU for keyed sources
  };
  const Entry& entry(std::size_t i) const { return entries_[i]; }

 private:
  std::vector<std::string> names_;
  std::vector<Entry> entries_;
};

struct FeatureVector {
  Eigen::VectorXd values;
  std::optional<std::size_t> label;
  GroupKey group_key;
  std::string instance_id;
  Timestamp submit_time = 0;
  // True when the instance has no prior occurrence; history features then
  // hold their sentinels (0).
  bool history_missing = false;
};

// History features see only instances submitted strictly before `instance`.
FeatureVector extract_features(const JobGroup& group, const JobInstance& instance, const FeatureSchema& schema);

using FeatureExtractor = std::function<FeatureVector(const JobGroup&, const JobInstance&, const FeatureSchema&)>;

// Per-row metadata kept next to a feature matrix.
struct RowInfo {
  std::string instance_id;
  std::string group_id;
  Timestamp submit_time = 0;
  double runtime = 0.0;
  // Lower median of strictly earlier runtimes; NaN without history.
  double historic_median = std::numeric_limits<double>::quiet_NaN();
  std::size_t occurrences = 1;  // this instance plus all earlier ones
};

struct LabeledSet {
  FeatureSchema schema;
  Eigen::MatrixXd features;  // rows aligned with labels/rows
  std::vector<std::size_t> labels;
  std::vector<RowInfo> rows;

  std::size_t size() const { return labels.size(); }
  // Row subset preserving order.
  LabeledSet select(const std::vector<std::size_t>& indices) const;
  LabeledSet with_schema(const FeatureSchema& reduced) const;
};

struct TimeWindow {
  Timestamp begin = 0;
  Timestamp end = 0;  // exclusive
};

// Median used to normalize a group's runtimes inside `window`: the historic
// median as of window.begin when history exists, else the lower median of
// the in-window runtimes.
double window_reference_median(const JobGroup& group, const TimeWindow& window);

// Raw (unsmoothed) observation PMF of one group inside a window.
std::optional<GroupPmf> window_pmf(const JobGroup& group, const TimeWindow& window, const BinningSpec& spec,
                                   std::size_t min_support);

// Feature rows for every instance in `window` whose group has at least
// `min_support` in-window instances; labels from posterior membership of the
// group's in-window PMF against `model`.
LabeledSet build_labeled_set(const Dataset& dataset, const ShapeModel& model, const FeatureSchema& schema,
                             const TimeWindow& window, std::size_t min_support = 3);

// Throws EmptySplit if either side is empty, InvalidArgument if the windows
// overlap or are out of order.
std::pair<LabeledSet, LabeledSet> split_by_time(const Dataset& dataset, const ShapeModel& model,
                                                const FeatureSchema& schema, const TimeWindow& train,
                                                const TimeWindow& test, std::size_t min_support = 3);

// Header = schema names (plus "label" when labeled), one row per vector.
std::string features_to_csv(const LabeledSet& set, bool include_labels = true);

struct LeakageViolation {
  std::string instance_id;
  std::string feature;
};

// Perturbs every instance submitted at or after each target instance and
// reports features of the target that changed as a result.
std::vector<LeakageViolation> audit_temporal_leakage(const Dataset& dataset, const FeatureSchema& schema,
                                                     const FeatureExtractor& extractor = extract_features);

}  // namespace rvar
