#include "rvar/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "rvar/error.hpp"

namespace rvar {

const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kIntrinsic: return "intrinsic";
    case FeatureKind::kResource: return "resource";
    case FeatureKind::kEnvironment: return "environment";
    case FeatureKind::kHistory: return "history";
  }
  return "intrinsic";
}

namespace {

using Source = FeatureSchema::Source;

const std::map<std::string, Source, std::less<>>& fixed_names() {
  static const std::map<std::string, Source, std::less<>> names = {
      {"vertex_count", Source::kVertexCount},
      {"cardinality_est", Source::kCardinality},
      {"input_bytes_hist_mean", Source::kInputBytesMean},
      {"input_bytes_hist_std", Source::kInputBytesStd},
      {"temp_read_bytes_hist_mean", Source::kTempReadMean},
      {"temp_read_bytes_hist_std", Source::kTempReadStd},
      {"token_alloc", Source::kTokenAlloc},
      {"token_min_hist_mean", Source::kTokenMinMean},
      {"token_min_hist_std", Source::kTokenMinStd},
      {"token_max_hist_mean", Source::kTokenMaxMean},
      {"token_max_hist_std", Source::kTokenMaxStd},
      {"token_avg_hist_mean", Source::kTokenAvgMean},
      {"token_avg_hist_std", Source::kTokenAvgStd},
      {"spare_token_avg", Source::kSpareTokenMean},
      {"n_prior_occurrences", Source::kPriorCount},
      {"runtime_hist_mean", Source::kRuntimeMean},
      {"runtime_hist_std", Source::kRuntimeStd},
      {"runtime_hist_median", Source::kRuntimeMedian},
  };
  return names;
}

const std::vector<std::pair<std::string, Source>>& keyed_prefixes() {
  static const std::vector<std::pair<std::string, Source>> prefixes = {
      {"ops", Source::kOpCount},
      {"sku_vertex_fraction", Source::kSkuFraction},
      {"cpu_util_mean", Source::kCpuUtilMean},
      {"cpu_util_std", Source::kCpuUtilStd},
  };
  return prefixes;
}

FeatureSchema::Entry parse_name(const std::string& name) {
  if (auto it = fixed_names().find(name); it != fixed_names().end()) return {it->second, {}};
  const auto open = name.find('[');
  if (open != std::string::npos && name.size() > open + 2 && name.back() == ']') {
    const auto prefix = name.substr(0, open);
    for (const auto& [p, source] : keyed_prefixes()) {
      if (p == prefix) return {source, name.substr(open + 1, name.size() - open - 2)};
    }
  }
  throw Error(ErrorCode::kSchema, "unknown feature '" + name + "'");
}

struct HistoryStats {
  double mean = 0.0;
  double std = 0.0;
};

HistoryStats stats_of(const std::vector<double>& v) {
  HistoryStats s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(v.size()));
  return s;
}

double lookup(const std::map<std::string, double>& m, const std::string& key, double missing) {
  auto it = m.find(key);
  return it == m.end() ? missing : it->second;
}

}  // namespace

FeatureSchema::FeatureSchema(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string> seen;
  entries_.reserve(names_.size());
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw Error(ErrorCode::kSchema, "duplicate feature '" + n + "'");
    entries_.push_back(parse_name(n));
  }
}

FeatureSchema FeatureSchema::for_dataset(const Dataset& dataset) {
  std::set<std::string> ops, skus;
  for (const auto& g : dataset.groups) {
    for (const auto& job : g.instances) {
      for (const auto& [op, _] : job.operator_counts) ops.insert(op);
      for (const auto& [sku, _] : job.sku_vertex_fraction) skus.insert(sku);
      for (const auto& [sku, _] : job.cpu_util_mean) skus.insert(sku);
      for (const auto& [sku, _] : job.cpu_util_std) skus.insert(sku);
    }
  }
  std::vector<std::string> names;
  for (const auto& op : ops) names.push_back("ops[" + op + "]");
  for (const char* n : {"vertex_count", "cardinality_est", "input_bytes_hist_mean", "input_bytes_hist_std",
                        "temp_read_bytes_hist_mean", "temp_read_bytes_hist_std", "token_alloc", "token_min_hist_mean",
                        "token_min_hist_std", "token_max_hist_mean", "token_max_hist_std", "token_avg_hist_mean",
                        "token_avg_hist_std", "spare_token_avg"}) {
    names.emplace_back(n);
  }
  for (const auto& s : skus) names.push_back("sku_vertex_fraction[" + s + "]");
  for (const auto& s : skus) names.push_back("cpu_util_mean[" + s + "]");
  for (const auto& s : skus) names.push_back("cpu_util_std[" + s + "]");
  for (const char* n : {"n_prior_occurrences", "runtime_hist_mean", "runtime_hist_std", "runtime_hist_median"}) {
    names.emplace_back(n);
  }
  return FeatureSchema(std::move(names));
}

FeatureKind FeatureSchema::kind(std::size_t i) const {
  switch (entries_[i].source) {
    case Source::kOpCount:
    case Source::kVertexCount:
    case Source::kCardinality:
    case Source::kInputBytesMean:
    case Source::kInputBytesStd:
    case Source::kTempReadMean:
    case Source::kTempReadStd:
      return FeatureKind::kIntrinsic;
    case Source::kTokenAlloc:
    case Source::kTokenMinMean:
    case Source::kTokenMinStd:
    case Source::kTokenMaxMean:
    case Source::kTokenMaxStd:
    case Source::kTokenAvgMean:
    case Source::kTokenAvgStd:
    case Source::kSpareTokenMean:
      return FeatureKind::kResource;
    case Source::kSkuFraction:
    case Source::kCpuUtilMean:
    case Source::kCpuUtilStd:
      return FeatureKind::kEnvironment;
    case Source::kPriorCount:
    case Source::kRuntimeMean:
    case Source::kRuntimeStd:
    case Source::kRuntimeMedian:
      return FeatureKind::kHistory;
  }
  return FeatureKind::kIntrinsic;
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t FeatureSchema::require(std::string_view name) const {
  auto i = index_of(name);
  if (!i) throw Error(ErrorCode::kUnknownFeature, "feature '" + std::string(name) + "' not in schema");
  return *i;
}

std::vector<std::string> FeatureSchema::skus() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    if (e.source == Source::kSkuFraction) out.push_back(e.key);
  }
  return out;
}

FeatureSchema FeatureSchema::subset(const std::vector<std::size_t>& keep) const {
  std::vector<std::string> names;
  for (auto i : keep) names.push_back(names_.at(i));
  return FeatureSchema(std::move(names));
}

std::uint64_t FeatureSchema::fingerprint() const {
  Fnv1a h;
  h.u64(names_.size());
  for (const auto& n : names_) h.str(n);
  return h.value();
}

FeatureVector extract_features(const JobGroup& group, const JobInstance& instance, const FeatureSchema& schema) {
  const auto in_group = std::any_of(group.instances.begin(), group.instances.end(),
                                    [&](const JobInstance& j) { return j.job_id == instance.job_id; });
  if (!in_group) throw Error(ErrorCode::kInvalidArgument, "instance '" + instance.job_id + "' is not in the group");

  std::vector<double> runtime, input, temp, tmin, tmax, tavg, spare;
  for (const auto& j : group.instances) {
    if (j.submit_time >= instance.submit_time) continue;
    runtime.push_back(j.runtime);
    input.push_back(j.input_bytes);
    temp.push_back(j.temp_read_bytes);
    tmin.push_back(j.token_min);
    tmax.push_back(j.token_max);
    tavg.push_back(j.token_avg);
    spare.push_back(j.spare_token_avg);
  }
  const auto rt = stats_of(runtime), in = stats_of(input), tp = stats_of(temp), mn = stats_of(tmin),
             mx = stats_of(tmax), av = stats_of(tavg), sp = stats_of(spare);

  FeatureVector fv;
  fv.values.resize(static_cast<Eigen::Index>(schema.size()));
  fv.group_key = group.key;
  fv.instance_id = instance.job_id;
  fv.submit_time = instance.submit_time;
  fv.history_missing = runtime.empty();

  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& e = schema.entry(i);
    double v = 0.0;
    switch (e.source) {
      case Source::kOpCount: v = lookup(instance.operator_counts, e.key, 0.0); break;
      case Source::kVertexCount: v = instance.vertex_count; break;
      case Source::kCardinality: v = instance.cardinality_est; break;
      case Source::kInputBytesMean: v = in.mean; break;
      case Source::kInputBytesStd: v = in.std; break;
      case Source::kTempReadMean: v = tp.mean; break;
      case Source::kTempReadStd: v = tp.std; break;
      case Source::kTokenAlloc: v = instance.token_alloc; break;
      case Source::kTokenMinMean: v = mn.mean; break;
      case Source::kTokenMinStd: v = mn.std; break;
      case Source::kTokenMaxMean: v = mx.mean; break;
      case Source::kTokenMaxStd: v = mx.std; break;
      case Source::kTokenAvgMean: v = av.mean; break;
      case Source::kTokenAvgStd: v = av.std; break;
      case Source::kSpareTokenMean: v = sp.mean; break;
      case Source::kSkuFraction: v = lookup(instance.sku_vertex_fraction, e.key, 0.0); break;
      case Source::kCpuUtilMean: v = lookup(instance.cpu_util_mean, e.key, kMissingUtilization); break;
      case Source::kCpuUtilStd: v = lookup(instance.cpu_util_std, e.key, kMissingUtilization); break;
      case Source::kPriorCount: v = static_cast<double>(runtime.size()); break;
      case Source::kRuntimeMean: v = rt.mean; break;
      case Source::kRuntimeStd: v = rt.std; break;
      case Source::kRuntimeMedian: v = runtime.empty() ? 0.0 : lower_median(runtime); break;
    }
    fv.values[static_cast<Eigen::Index>(i)] = v;
  }
  return fv;
}

LabeledSet LabeledSet::select(const std::vector<std::size_t>& indices) const {
  LabeledSet out;
  out.schema = schema;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(indices[r]));
    out.labels.push_back(labels[indices[r]]);
    out.rows.push_back(rows[indices[r]]);
  }
  return out;
}

LabeledSet LabeledSet::with_schema(const FeatureSchema& reduced) const {
  LabeledSet out;
  out.schema = reduced;
  out.labels = labels;
  out.rows = rows;
  out.features.resize(features.rows(), static_cast<Eigen::Index>(reduced.size()));
  for (std::size_t c = 0; c < reduced.size(); ++c) {
    out.features.col(static_cast<Eigen::Index>(c)) =
        features.col(static_cast<Eigen::Index>(schema.require(reduced.name(c))));
  }
  return out;
}

double window_reference_median(const JobGroup& group, const TimeWindow& window) {
  std::vector<double> prior, inside;
  for (const auto& j : group.instances) {
    if (j.submit_time < window.begin) prior.push_back(j.runtime);
    else if (j.submit_time < window.end) inside.push_back(j.runtime);
  }
  if (!prior.empty()) return lower_median(prior);
  if (inside.empty()) throw Error(ErrorCode::kNoHistory, "group has no instance up to the window end");
  return lower_median(inside);
}

std::optional<GroupPmf> window_pmf(const JobGroup& group, const TimeWindow& window, const BinningSpec& spec,
                                   std::size_t min_support) {
  std::vector<double> runtimes;
  for (const auto& j : group.instances) {
    if (j.submit_time >= window.begin && j.submit_time < window.end) runtimes.push_back(j.runtime);
  }
  if (runtimes.empty() || runtimes.size() < min_support) return std::nullopt;
  const double median = window_reference_median(group, window);
  std::vector<double> values;
  values.reserve(runtimes.size());
  for (double r : runtimes) values.push_back(normalize_runtime(r, median, spec.mode));
  auto pmf = histogram(values, spec);
  pmf.group_key = group.key;
  return pmf;
}

LabeledSet build_labeled_set(const Dataset& dataset, const ShapeModel& model, const FeatureSchema& schema,
                             const TimeWindow& window, std::size_t min_support) {
  LabeledSet set;
  set.schema = schema;
  std::vector<Eigen::VectorXd> rows;
  for (const auto& group : dataset.groups) {
    auto pmf = window_pmf(group, window, model.spec, min_support);
    if (!pmf) continue;
    const auto label = assign_membership(*pmf, model).cluster_id;
    const auto gid = group.key.id();
    for (const auto& job : group.instances) {
      if (job.submit_time < window.begin) continue;
      if (job.submit_time >= window.end) break;
      auto fv = extract_features(group, job, schema);
      RowInfo info;
      info.instance_id = job.job_id;
      info.group_id = gid;
      info.submit_time = job.submit_time;
      info.runtime = job.runtime;
      if (!fv.history_missing) info.historic_median = historic_median(group, job.submit_time);
      std::size_t earlier = 0;
      for (const auto& j : group.instances) earlier += j.submit_time < job.submit_time ? 1 : 0;
      info.occurrences = earlier + 1;
      set.rows.push_back(std::move(info));
      set.labels.push_back(label);
      rows.push_back(std::move(fv.values));
    }
  }
  set.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(schema.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) set.features.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  return set;
}

std::pair<LabeledSet, LabeledSet> split_by_time(const Dataset& dataset, const ShapeModel& model,
                                                const FeatureSchema& schema, const TimeWindow& train,
                                                const TimeWindow& test, std::size_t min_support) {
  if (!(train.begin < train.end) || !(test.begin < test.end) || train.end > test.begin) {
    throw Error(ErrorCode::kInvalidArgument, "train and test windows must be non-empty, disjoint and ordered");
  }
  auto train_set = build_labeled_set(dataset, model, schema, train, min_support);
  auto test_set = build_labeled_set(dataset, model, schema, test, min_support);
  if (train_set.size() == 0) throw Error(ErrorCode::kEmptySplit, "training window holds no labeled instance");
  if (test_set.size() == 0) throw Error(ErrorCode::kEmptySplit, "test window holds no labeled instance");
  return {std::move(train_set), std::move(test_set)};
}

std::string features_to_csv(const LabeledSet& set, bool include_labels) {
  std::string out;
  for (std::size_t c = 0; c < set.schema.size(); ++c) {
    if (c) out += ',';
    out += set.schema.name(c);
  }
  if (include_labels) out += ",label";
  out += '\n';
  char buf[40];
  for (Eigen::Index r = 0; r < set.features.rows(); ++r) {
    for (Eigen::Index c = 0; c < set.features.cols(); ++c) {
      if (c) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", set.features(r, c));
      out += buf;
    }
    if (include_labels) out += "," + std::to_string(set.labels[static_cast<std::size_t>(r)]);
    out += '\n';
  }
  return out;
}

namespace {

void perturb(JobInstance& j) {
  j.runtime = j.runtime * 3.0 + 1.0;
  j.input_bytes = j.input_bytes * 7.0 + 11.0;
  j.temp_read_bytes = j.temp_read_bytes * 5.0 + 13.0;
  j.token_min += 17.0;
  j.token_max += 19.0;
  j.token_avg += 23.0;
  j.spare_token_avg += 29.0;
}

bool same_bits(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

}  // namespace

std::vector<LeakageViolation> audit_temporal_leakage(const Dataset& dataset, const FeatureSchema& schema,
                                                     const FeatureExtractor& extractor) {
  std::vector<LeakageViolation> violations;
  for (const auto& group : dataset.groups) {
    for (std::size_t i = 0; i < group.instances.size(); ++i) {
      const auto& target = group.instances[i];
      const auto baseline = extractor(group, target, schema);
      JobGroup altered = group;
      for (std::size_t j = 0; j < altered.instances.size(); ++j) {
        if (j != i && altered.instances[j].submit_time >= target.submit_time) perturb(altered.instances[j]);
      }
      const auto probe = extractor(altered, altered.instances[i], schema);
      for (std::size_t f = 0; f < schema.size(); ++f) {
        const auto idx = static_cast<Eigen::Index>(f);
        if (!same_bits(baseline.values[idx], probe.values[idx])) {
          violations.push_back({target.job_id, schema.name(f)});
        }
      }
    }
  }
  return violations;
}

}  // namespace rvar
