#include "rvar/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

#include "rvar/error.hpp"

namespace rvar {

PipelineWindows pipeline_windows(const Dataset& dataset, double fit_end, double train_end) {
  if (!(fit_end > 0.0 && fit_end < train_end && train_end < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "window fractions must satisfy 0 < fit_end < train_end < 1");
  }
  if (dataset.groups.empty()) throw Error(ErrorCode::kEmptySplit, "dataset has no groups");
  const auto [first, last] = time_span(dataset);
  const double length = static_cast<double>(last - first + 1);
  const Timestamp fit_cut = first + static_cast<Timestamp>(std::floor(fit_end * length));
  const Timestamp train_cut = first + static_cast<Timestamp>(std::floor(train_end * length));
  return {{first, fit_cut}, {fit_cut, train_cut}, {train_cut, last + 1}};
}

ClusterInput cluster_input(const Dataset& dataset, const BinningSpec& spec, const TimeWindow& window,
                           std::size_t min_support) {
  ClusterInput in;
  for (const auto& group : dataset.groups) {
    std::vector<double> runtimes;
    for (const auto& j : group.instances) {
      if (j.submit_time >= window.begin && j.submit_time < window.end) runtimes.push_back(j.runtime);
    }
    if (runtimes.empty() || runtimes.size() < min_support) continue;
    const double median = window_reference_median(group, window);
    ClusterSample s;
    s.values.reserve(runtimes.size());
    for (double r : runtimes) s.values.push_back(normalize_runtime(r, median, spec.mode));
    auto pmf = histogram(s.values, spec);
    pmf.group_key = group.key;
    s.smoothed = smooth(pmf);
    in.samples.push_back(std::move(s));
    in.group_ids.push_back(group.key.id());
    in.true_clusters.push_back(group.instances.front().true_cluster);
  }
  return in;
}

ClusterStep cluster_step(const Dataset& dataset, const PipelineConfig& config, const TimeWindow& window) {
  ClusterStep step;
  step.input = cluster_input(dataset, BinningSpec::for_mode(config.mode), window, config.cluster_support);
  KMeansOptions opts;
  opts.k = config.k;
  opts.seed = config.seed;
  opts.n_init = config.n_init;
  step.fit = kmeans_fit(step.input.samples, opts);
  return step;
}

LabeledSet labeled_window(const Dataset& dataset, const ShapeModel& model, const FeatureSchema& schema,
                          const TimeWindow& window, std::size_t min_support) {
  return build_labeled_set(dataset, model, schema, window, min_support);
}

TrainStep train_step(const Dataset& dataset, const ShapeModel& model, const PipelineWindows& windows,
                     const PipelineConfig& config) {
  TrainStep step;
  const auto schema = FeatureSchema::for_dataset(dataset);
  std::tie(step.train, step.test) =
      split_by_time(dataset, model, schema, windows.train, windows.test, config.label_support);

  if (config.shuffle_labels) {
    std::mt19937_64 rng(mix_seed(config.seed, 0x5eed));
    std::shuffle(step.train.labels.begin(), step.train.labels.end(), rng);
  }

  step.params = config.forest;
  step.params.seed = config.seed;
  if (config.select_threshold > 0.0) {
    step.selection = select_features(step.train, model.k, config.select_threshold, step.params);
    step.train = step.train.with_schema(step.selection->schema);
    step.test = step.test.with_schema(step.selection->schema);
  }
  if (config.sweep) {
    step.sweep = sweep_classifier(step.train, model.k, step.params);
    step.params = step.sweep->best;
  }
  step.classifier = train_classifier(step.train, model.k, step.params);
  step.regression = train_regression_baseline(step.train, step.params);
  return step;
}

PipelineResult run_pipeline(const Dataset& dataset, const PipelineConfig& config) {
  PipelineResult r;
  r.windows = pipeline_windows(dataset, config.fit_end, config.train_end);
  r.cluster = cluster_step(dataset, config, r.windows.fit);
  r.train = train_step(dataset, r.cluster.fit.model, r.windows, config);
  r.eval = evaluate(r.train.classifier, r.train.regression, r.cluster.fit.model, r.train.test);
  return r;
}

}  // namespace rvar
