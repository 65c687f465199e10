#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rvar/telemetry.hpp"

namespace rvar {

// One planted runtime-distribution family. A draw is median * M with M from a
// mixture of a lognormal main mode, an optional second mode centred at
// second_mode_offset, and an outlier spike at outlier_scale.
struct ShapeParams {
  double median_min = 60.0;  // seconds; the group median is log-uniform in range
  double median_max = 3600.0;
  double second_mode_offset = 1.0;  // ratio to the median
  double second_mode_weight = 0.0;
  double spread = 0.1;  // lognormal sigma, shared by both modes
  double outlier_prob = 0.0;
  double outlier_scale = 10.0;

  bool operator==(const ShapeParams&) const = default;
};

// Which features carry the planted shape.
enum class FeatureSignal {
  kPrototype,  // every generated feature follows its shape prototype
  kSpareTokens,  // only spare_token_avg does; the rest is shape-independent noise
};

const char* to_string(FeatureSignal signal);
FeatureSignal parse_feature_signal(std::string_view name);

struct SynthConfig {
  std::size_t n_groups = 200;
  std::size_t instances_min = 60;
  std::size_t instances_max = 90;
  // Shapes are assigned to groups round-robin; k_true = shapes.size().
  std::vector<ShapeParams> shapes;
  double feature_noise = 0.1;
  FeatureSignal signal = FeatureSignal::kPrototype;
  std::uint64_t seed = 0;
  Timestamp start_time = 1609459200;  // 2021-01-01T00:00:00Z
  std::int64_t span_seconds = 60 * 86400;
  std::vector<std::string> skus = {"Gen3.5", "Gen4.1", "Gen5.2"};

  std::size_t k_true() const { return shapes.size(); }
  // Throws ConfigError.
  void validate() const;

  bool operator==(const SynthConfig&) const = default;
};

// Four shapes ordered by increasing spread of normalized runtime.
std::vector<ShapeParams> default_shapes();

// "separable", "heavy_tailed_bimodal" or "planted_mechanism"; ConfigError otherwise.
SynthConfig synth_preset(std::string_view name, std::uint64_t seed = 0);
std::vector<std::string> synth_preset_names();

// Deterministic in config.seed; each group draws from its own RNG stream.
Dataset generate_workload(const SynthConfig& config);

}  // namespace rvar
