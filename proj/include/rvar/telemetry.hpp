#pragma once

#include <cstdint>
#include <compare>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rvar/util.hpp"

namespace rvar {

// Compiled operator plan. Children are indices into `nodes`.
struct OperatorNode {
  std::string operator_type;
  std::vector<std::size_t> children;

  bool operator==(const OperatorNode&) const = default;
};

struct OperatorDag {
  std::vector<OperatorNode> nodes;

  bool operator==(const OperatorDag&) const = default;
};

using SkuMap = std::map<std::string, double>;

// One execution of a recurring job, summarized at job level.
struct JobInstance {
  std::string job_id;
  std::string raw_name;
  Timestamp submit_time = 0;
  double runtime = 0.0;  // seconds
  OperatorDag plan;
  double input_bytes = 0.0;
  double temp_read_bytes = 0.0;
  double vertex_count = 0.0;
  double token_alloc = 0.0;
  double token_min = 0.0;
  double token_max = 0.0;
  double token_avg = 0.0;
  double spare_token_avg = 0.0;
  SkuMap sku_vertex_fraction;
  SkuMap cpu_util_mean;
  SkuMap cpu_util_std;
  double cardinality_est = 0.0;
  std::map<std::string, double> operator_counts;
  std::optional<int> true_cluster;

  bool operator==(const JobInstance&) const = default;
};

// Throws Error(kSchema) when a JobInstance invariant is violated.
void validate(const JobInstance& job);

struct GroupKey {
  std::string normalized_name;
  std::uint64_t plan_signature = 0;

  auto operator<=>(const GroupKey&) const = default;

  // Stable 16-hex-digit identifier, safe to use in URLs.
  std::string id() const;
};

struct JobGroup {
  GroupKey key;
  std::vector<JobInstance> instances;  // ascending submit_time

  std::size_t support() const { return instances.size(); }
};

enum class DatasetRole { kClusterFit, kTrain, kTest };

const char* to_string(DatasetRole role);
DatasetRole parse_dataset_role(std::string_view name);

struct Dataset {
  std::vector<JobGroup> groups;  // ascending key
  DatasetRole role = DatasetRole::kClusterFit;
  std::size_t min_support = 1;

  std::size_t instance_count() const;
  const JobGroup* find(std::string_view group_id) const;
};

// Replaces volatile substrings (GUIDs, ISO dates and datetimes, yyyy/mm/dd dates,
// hex blobs of 16+ characters, digit runs of 8+) with '#'. Idempotent.
std::string normalize_job_name(std::string_view raw_name);

// Merkle hash over operator types; child order does not matter. Throws
// CyclicPlan on cycles and InvalidPlan on out-of-range child indices.
std::uint64_t plan_signature(const OperatorDag& plan);

GroupKey group_key(const JobInstance& job);

std::vector<JobGroup> group_instances(std::vector<JobInstance> instances, std::size_t min_support);

// Lower median of the runtimes submitted strictly before `as_of`.
double historic_median(const JobGroup& group, Timestamp as_of);

// Lower median of an arbitrary sample (must be non-empty).
double lower_median(std::span<const double> values);

// JSONL, one JobInstance per line. Blank lines are skipped.
Dataset load_dataset(const std::string& path, DatasetRole role, std::size_t min_support);
std::vector<JobInstance> read_instances(const std::string& path);
void write_instances(const std::string& path, std::span<const JobInstance> instances);
void write_dataset(const std::string& path, const Dataset& dataset);

// Restricts every group to instances with submit_time in [begin, end) and
// drops groups that fall below `min_support`.
Dataset slice(const Dataset& dataset, Timestamp begin, Timestamp end, DatasetRole role, std::size_t min_support);

// [first, last] submit_time over the whole dataset.
std::pair<Timestamp, Timestamp> time_span(const Dataset& dataset);

}  // namespace rvar
