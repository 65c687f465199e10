#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rvar/clustering.hpp"
#include "rvar/evaluation.hpp"
#include "rvar/features.hpp"
#include "rvar/forest.hpp"
#include "rvar/telemetry.hpp"

namespace rvar {

// End-to-end settings. Window bounds are fractions of the dataset's time span.
struct PipelineConfig {
  NormalizationMode mode = NormalizationMode::kRatio;
  std::size_t k = 8;
  std::uint64_t seed = 0;
  double fit_end = 0.5;
  double train_end = 0.8;
  std::size_t cluster_support = 20;
  std::size_t label_support = 3;
  std::size_t n_init = 5;
  ForestParams forest{.n_trees = 50};
  bool sweep = false;
  double select_threshold = 0.0;  // 0 keeps every feature
  bool shuffle_labels = false;    // chance-level control
};

struct PipelineWindows {
  TimeWindow fit;
  TimeWindow train;
  TimeWindow test;
};

// InvalidArgument unless 0 < fit_end < train_end < 1.
PipelineWindows pipeline_windows(const Dataset& dataset, double fit_end, double train_end);

// Smoothed in-window PMFs of every group with at least `min_support`
// observations in the window, plus the normalized values behind each.
struct ClusterInput {
  std::vector<ClusterSample> samples;
  std::vector<std::string> group_ids;
  std::vector<std::optional<int>> true_clusters;  // from the first instance
};

ClusterInput cluster_input(const Dataset& dataset, const BinningSpec& spec, const TimeWindow& window,
                           std::size_t min_support);

struct ClusterStep {
  ClusterInput input;
  ShapeFit fit;
};

ClusterStep cluster_step(const Dataset& dataset, const PipelineConfig& config, const TimeWindow& window);

struct TrainStep {
  LabeledSet train;
  LabeledSet test;
  TreeEnsembleClassifier classifier;
  RegressionForest regression;
  ForestParams params;  // after the optional sweep
  std::optional<FeatureSelection> selection;
  std::optional<SweepResult> sweep;
};

// Builds train/test sets, optionally selects features and sweeps, then fits
// the classifier and the regression baseline on the same feature schema.
TrainStep train_step(const Dataset& dataset, const ShapeModel& model, const PipelineWindows& windows,
                     const PipelineConfig& config);

// Labeled rows of one window under `schema`.
LabeledSet labeled_window(const Dataset& dataset, const ShapeModel& model, const FeatureSchema& schema,
                          const TimeWindow& window, std::size_t min_support);

struct PipelineResult {
  PipelineWindows windows;
  ClusterStep cluster;
  TrainStep train;
  EvalReport eval;
};

PipelineResult run_pipeline(const Dataset& dataset, const PipelineConfig& config);

}  // namespace rvar
