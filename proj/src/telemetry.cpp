#include "rvar/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <regex>

#include "rvar/error.hpp"
#include "rvar/serialize.hpp"

namespace rvar {

void validate(const JobInstance& job) {
  auto bad = [&](const std::string& why) { return Error(ErrorCode::kSchema, "job '" + job.job_id + "': " + why); };
  if (!(job.runtime > 0.0) || !std::isfinite(job.runtime)) throw bad("runtime must be > 0");
  for (double v : {job.input_bytes, job.temp_read_bytes, job.vertex_count, job.token_alloc, job.token_min,
                   job.token_max, job.token_avg, job.spare_token_avg, job.cardinality_est}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw bad("counts and sizes must be finite and >= 0");
  }
  for (const auto& [op, n] : job.operator_counts) {
    if (!(n >= 0.0)) throw bad("operator count for '" + op + "' is negative");
  }
  if (!job.sku_vertex_fraction.empty()) {
    double total = 0.0;
    for (const auto& [sku, f] : job.sku_vertex_fraction) {
      if (!(f >= 0.0 && f <= 1.0)) throw bad("vertex fraction for '" + sku + "' outside [0,1]");
      total += f;
    }
    if (std::abs(total - 1.0) > 1e-6) throw bad("vertex fractions do not sum to 1");
  }
  for (const auto& [sku, u] : job.cpu_util_mean) {
    if (!(u >= 0.0 && u <= 1.0)) throw bad("cpu_util_mean for '" + sku + "' outside [0,1]");
  }
  for (const auto& [sku, u] : job.cpu_util_std) {
    if (!(u >= 0.0)) throw bad("cpu_util_std for '" + sku + "' is negative");
  }
  for (const auto& node : job.plan.nodes) {
    for (auto c : node.children) {
      if (c >= job.plan.nodes.size()) throw bad("plan child index out of range");
    }
  }
}

std::string GroupKey::id() const {
  return to_hex(Fnv1a{}.str(normalized_name).u64(plan_signature).value());
}

const char* to_string(DatasetRole role) {
  switch (role) {
    case DatasetRole::kClusterFit: return "cluster_fit";
    case DatasetRole::kTrain: return "train";
    case DatasetRole::kTest: return "test";
  }
  return "cluster_fit";
}

DatasetRole parse_dataset_role(std::string_view name) {
  if (name == "cluster_fit") return DatasetRole::kClusterFit;
  if (name == "train") return DatasetRole::kTrain;
  if (name == "test") return DatasetRole::kTest;
  throw Error(ErrorCode::kInvalidArgument, "unknown dataset role '" + std::string(name) + "'");
}

std::size_t Dataset::instance_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.support();
  return n;
}

const JobGroup* Dataset::find(std::string_view group_id) const {
  for (const auto& g : groups) {
    if (g.key.id() == group_id) return &g;
  }
  return nullptr;
}

std::string normalize_job_name(std::string_view raw_name) {
  // Applied in order; none of the patterns can match '#', so the result is a
  // fixed point of the whole pass.
  static const std::vector<std::regex> patterns = {
      std::regex("[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}"),
      std::regex("[0-9]{4}-[0-9]{2}-[0-9]{2}([Tt ][0-9]{2}:[0-9]{2}(:[0-9]{2}(\\.[0-9]+)?)?([Zz]|[+-][0-9]{2}:?[0-9]{2})?)?"),
      std::regex("[0-9]{4}/[0-9]{2}/[0-9]{2}"),
      std::regex("[0-9a-fA-F]{16,}"),
      std::regex("[0-9]{8,}"),
  };
  std::string out(raw_name);
  for (const auto& re : patterns) out = std::regex_replace(out, re, "#");
  return out;
}

std::uint64_t plan_signature(const OperatorDag& plan) {
  const auto n = plan.nodes.size();
  if (n == 0) return Fnv1a{}.str("<empty>").value();

  enum class Mark : unsigned char { kNew, kActive, kDone };
  std::vector<Mark> mark(n, Mark::kNew);
  std::vector<std::uint64_t> hash(n, 0);
  std::vector<bool> has_parent(n, false);

  for (std::size_t i = 0; i < n; ++i) {
    for (auto c : plan.nodes[i].children) {
      if (c >= n) throw Error(ErrorCode::kInvalidPlan, "child index " + std::to_string(c) + " out of range");
      has_parent[c] = true;
    }
  }

  // Iterative post-order DFS with cycle detection.
  for (std::size_t start = 0; start < n; ++start) {
    if (mark[start] != Mark::kNew) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{start, 0}};
    mark[start] = Mark::kActive;
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      const auto& children = plan.nodes[node].children;
      if (next < children.size()) {
        auto c = children[next++];
        if (mark[c] == Mark::kActive) throw Error(ErrorCode::kCyclicPlan, "operator plan contains a cycle");
        if (mark[c] == Mark::kNew) {
          mark[c] = Mark::kActive;
          stack.emplace_back(c, 0);
        }
        continue;
      }
      std::vector<std::uint64_t> child_hashes;
      child_hashes.reserve(children.size());
      for (auto c : children) child_hashes.push_back(hash[c]);
      std::sort(child_hashes.begin(), child_hashes.end());
      Fnv1a h;
      h.str(plan.nodes[node].operator_type).u64(child_hashes.size());
      for (auto ch : child_hashes) h.u64(ch);
      hash[node] = h.value();
      mark[node] = Mark::kDone;
      stack.pop_back();
    }
  }

  std::vector<std::uint64_t> roots;
  for (std::size_t i = 0; i < n; ++i) {
    if (!has_parent[i]) roots.push_back(hash[i]);
  }
  if (roots.size() == 1) return roots.front();
  // A forest of plans hashes under a synthetic root.
  std::sort(roots.begin(), roots.end());
  Fnv1a h;
  h.str("<root>").u64(roots.size());
  for (auto r : roots) h.u64(r);
  return h.value();
}

GroupKey group_key(const JobInstance& job) {
  return GroupKey{normalize_job_name(job.raw_name), plan_signature(job.plan)};
}

std::vector<JobGroup> group_instances(std::vector<JobInstance> instances, std::size_t min_support) {
  if (min_support < 1) throw Error(ErrorCode::kInvalidArgument, "min_support must be >= 1");
  std::map<GroupKey, std::vector<JobInstance>> by_key;
  for (auto& job : instances) {
    auto key = group_key(job);
    by_key[std::move(key)].push_back(std::move(job));
  }
  std::vector<JobGroup> groups;
  for (auto& [key, members] : by_key) {
    if (members.size() < min_support) continue;
    std::stable_sort(members.begin(), members.end(), [](const JobInstance& a, const JobInstance& b) {
      if (a.submit_time != b.submit_time) return a.submit_time < b.submit_time;
      return a.job_id < b.job_id;
    });
    groups.push_back(JobGroup{key, std::move(members)});
  }
  return groups;
}

double lower_median(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::kInsufficientSamples, "median of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

double historic_median(const JobGroup& group, Timestamp as_of) {
  std::vector<double> prior;
  for (const auto& job : group.instances) {
    if (job.submit_time < as_of) prior.push_back(job.runtime);
  }
  if (prior.empty()) throw Error(ErrorCode::kNoHistory, "no instance before the reference time");
  return lower_median(prior);
}

std::vector<JobInstance> read_instances(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::vector<JobInstance> jobs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, e.what());
    }
    try {
      jobs.push_back(job_instance_from_json(j));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kSchema) throw Error(ErrorCode::kSchema, "line " + std::to_string(lineno) + ": " + e.what());
      throw ParseError(lineno, e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, e.what());
    }
  }
  if (in.bad()) throw Error(ErrorCode::kIo, "read failure on '" + path + "'");
  return jobs;
}

void write_instances(const std::string& path, std::span<const JobInstance> instances) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  for (const auto& job : instances) out << to_json(job).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failure on '" + path + "'");
}

void write_dataset(const std::string& path, const Dataset& dataset) {
  std::vector<JobInstance> all;
  all.reserve(dataset.instance_count());
  for (const auto& g : dataset.groups) all.insert(all.end(), g.instances.begin(), g.instances.end());
  write_instances(path, all);
}

Dataset load_dataset(const std::string& path, DatasetRole role, std::size_t min_support) {
  Dataset ds;
  ds.role = role;
  ds.min_support = min_support;
  ds.groups = group_instances(read_instances(path), min_support);
  return ds;
}

Dataset slice(const Dataset& dataset, Timestamp begin, Timestamp end, DatasetRole role, std::size_t min_support) {
  Dataset out;
  out.role = role;
  out.min_support = min_support;
  for (const auto& g : dataset.groups) {
    JobGroup sub{g.key, {}};
    for (const auto& job : g.instances) {
      if (job.submit_time >= begin && job.submit_time < end) sub.instances.push_back(job);
    }
    if (sub.support() >= min_support && sub.support() > 0) out.groups.push_back(std::move(sub));
  }
  return out;
}

std::pair<Timestamp, Timestamp> time_span(const Dataset& dataset) {
  bool any = false;
  Timestamp lo = 0, hi = 0;
  for (const auto& g : dataset.groups) {
    for (const auto& job : g.instances) {
      if (!any || job.submit_time < lo) lo = job.submit_time;
      if (!any || job.submit_time > hi) hi = job.submit_time;
      any = true;
    }
  }
  if (!any) throw Error(ErrorCode::kEmptySample, "dataset has no instances");
  return {lo, hi};
}

}  // namespace rvar
