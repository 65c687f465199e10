#include "rvar/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rvar/error.hpp"

namespace rvar {

namespace {

const std::vector<std::string> kOperatorTypes = {"Extract", "Filter", "Project", "Join",
                                                 "Aggregate", "Sort", "Window", "Union"};

double truncated_normal(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    const double z = n(rng);
    if (std::abs(z) <= 4.0) return z;
  }
}

double runtime_multiplier(const ShapeParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double pick = u(rng);
  const double z = truncated_normal(rng);
  if (pick < p.outlier_prob) return p.outlier_scale * std::exp(0.02 * z);
  if (pick < p.outlier_prob + (1.0 - p.outlier_prob) * p.second_mode_weight) {
    return p.second_mode_offset * std::exp(p.spread * z);
  }
  return std::exp(p.spread * z);
}

// Random rooted DAG: node 0 is the output, every other node hangs off an
// earlier one so the plan is acyclic by construction.
OperatorDag random_plan(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> size_dist(3, 9);
  std::uniform_int_distribution<std::size_t> op_dist(0, kOperatorTypes.size() - 1);
  const std::size_t n = size_dist(rng);
  OperatorDag dag;
  dag.nodes.push_back({"Output", {}});
  for (std::size_t i = 1; i < n; ++i) {
    dag.nodes.push_back({kOperatorTypes[op_dist(rng)], {}});
    std::uniform_int_distribution<std::size_t> parent(0, i - 1);
    dag.nodes[parent(rng)].children.push_back(i);
  }
  return dag;
}

std::string date_string(Timestamp t) { return format_rfc3339(t).substr(0, 10); }

// Latent position of a group on each feature channel.
struct Latent {
  double input = 0, temp = 0, vertices = 0, tokens = 0, spare = 0, cardinality = 0, sku = 0, cpu = 0;
};

}  // namespace

const char* to_string(FeatureSignal signal) {
  return signal == FeatureSignal::kPrototype ? "prototype" : "spare_tokens";
}

FeatureSignal parse_feature_signal(std::string_view name) {
  if (name == "prototype") return FeatureSignal::kPrototype;
  if (name == "spare_tokens") return FeatureSignal::kSpareTokens;
  throw Error(ErrorCode::kConfig, "unknown feature signal '" + std::string(name) + "'");
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfig, msg); };
  if (n_groups == 0) fail("n_groups must be positive");
  if (instances_min == 0 || instances_min > instances_max) fail("instances range must satisfy 1 <= min <= max");
  if (shapes.size() < 2) fail("k_true must be at least 2");
  if (!(feature_noise >= 0.0) || !std::isfinite(feature_noise)) fail("feature_noise must be >= 0");
  if (span_seconds <= 0) fail("span_seconds must be positive");
  if (skus.empty()) fail("at least one SKU is required");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& s = shapes[i];
    const std::string at = "shape " + std::to_string(i) + ": ";
    if (!(s.median_min > 0.0) || !(s.median_min <= s.median_max)) fail(at + "median range must satisfy 0 < min <= max");
    if (!(s.second_mode_weight >= 0.0 && s.second_mode_weight <= 1.0)) fail(at + "second_mode_weight outside [0,1]");
    if (!(s.outlier_prob >= 0.0 && s.outlier_prob <= 1.0)) fail(at + "outlier_prob outside [0,1]");
    if (!(s.second_mode_offset > 0.0)) fail(at + "second_mode_offset must be positive");
    if (!(s.spread >= 0.0) || !std::isfinite(s.spread)) fail(at + "spread must be >= 0");
    if (!(s.outlier_scale > 0.0)) fail(at + "outlier_scale must be positive");
  }
}

std::vector<ShapeParams> default_shapes() {
  ShapeParams tight;
  tight.spread = 0.02;

  ShapeParams moderate;
  moderate.spread = 0.10;
  moderate.outlier_prob = 0.01;
  moderate.outlier_scale = 12.0;

  ShapeParams wide;
  wide.spread = 0.35;
  wide.outlier_prob = 0.05;
  wide.outlier_scale = 15.0;

  ShapeParams bimodal;
  bimodal.spread = 0.02;
  bimodal.second_mode_offset = 3.0;
  bimodal.second_mode_weight = 0.30;
  return {tight, moderate, wide, bimodal};
}

std::vector<std::string> synth_preset_names() { return {"separable", "heavy_tailed_bimodal", "planted_mechanism"}; }

SynthConfig synth_preset(std::string_view name, std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.shapes = default_shapes();
  if (name == "separable") {
    c.feature_noise = 0.1;
  } else if (name == "heavy_tailed_bimodal") {
    ShapeParams a;
    a.spread = 0.10;
    ShapeParams b;
    b.spread = 0.25;
    b.outlier_prob = 0.03;
    b.outlier_scale = 12.0;
    ShapeParams c2;
    c2.spread = 0.45;
    c2.outlier_prob = 0.08;
    c2.outlier_scale = 12.0;
    ShapeParams d;
    d.spread = 0.10;
    d.second_mode_offset = 2.5;
    d.second_mode_weight = 0.4;
    c.shapes = {a, b, c2, d};
    for (auto& s : c.shapes) {
      s.median_min = 200.0;
      s.median_max = 2000.0;
    }
    c.feature_noise = 0.3;
  } else if (name == "planted_mechanism") {
    c.feature_noise = 0.1;
    c.signal = FeatureSignal::kSpareTokens;
  } else {
    throw Error(ErrorCode::kConfig, "unknown synth preset '" + std::string(name) + "'");
  }
  return c;
}

Dataset generate_workload(const SynthConfig& config) {
  config.validate();
  const std::size_t k = config.k_true();
  std::vector<JobInstance> all;
  for (std::size_t g = 0; g < config.n_groups; ++g) {
    std::mt19937_64 rng(mix_seed(config.seed, g));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);

    const std::size_t shape = g % k;
    const ShapeParams& p = config.shapes[shape];
    const double median = p.median_min * std::pow(p.median_max / p.median_min, u(rng));
    std::uniform_int_distribution<std::size_t> count_dist(config.instances_min, config.instances_max);
    const std::size_t count = count_dist(rng);
    const OperatorDag plan = random_plan(rng);
    std::map<std::string, double> op_counts;
    for (const auto& node : plan.nodes) op_counts[node.operator_type] += 1.0;

    // Shape-carrying channels sit at the shape index; under kSpareTokens the
    // others sit at an unrelated random level.
    std::uniform_int_distribution<std::size_t> decoy(0, k - 1);
    auto channel = [&](bool informative) {
      const double centre = informative ? static_cast<double>(shape) : static_cast<double>(decoy(rng));
      return centre + config.feature_noise * n01(rng);
    };
    const bool proto = config.signal == FeatureSignal::kPrototype;
    Latent z;
    z.input = channel(proto);
    z.temp = channel(proto);
    z.vertices = channel(proto);
    z.tokens = channel(proto);
    z.spare = channel(true);
    z.cardinality = channel(proto);
    z.sku = channel(proto);
    z.cpu = channel(proto);
    if (config.signal == FeatureSignal::kSpareTokens) z.spare *= 3.0;

    const std::string base = "Pipeline" + std::to_string(g) + "_Daily_";
    const double step = static_cast<double>(config.span_seconds) / static_cast<double>(count);
    const double group_phase = u(rng);
    for (std::size_t i = 0; i < count; ++i) {
      JobInstance job;
      job.submit_time =
          config.start_time + static_cast<Timestamp>(std::floor((static_cast<double>(i) + group_phase) * step));
      job.job_id = "g" + std::to_string(g) + "-i" + std::to_string(i);
      job.raw_name = base + date_string(job.submit_time);
      job.runtime = median * runtime_multiplier(p, rng);
      job.plan = plan;
      job.operator_counts = op_counts;

      auto jitter = [&](double scale) { return scale * n01(rng); };
      job.input_bytes = std::exp2(30.0 + 1.5 * z.input + jitter(0.05));
      job.temp_read_bytes = job.input_bytes * 0.2 * std::exp(0.4 * z.temp + jitter(0.05));
      job.vertex_count = std::round(50.0 * std::exp(0.5 * z.vertices + jitter(0.05)));
      job.token_alloc = std::max(1.0, std::round(50.0 + 40.0 * z.tokens));
      job.token_avg = std::max(0.0, job.token_alloc * (0.8 + jitter(0.02)));
      job.token_min = job.token_avg * 0.4;
      job.token_max = job.token_alloc * 1.1;
      job.spare_token_avg = std::max(0.0, 5.0 + 10.0 * z.spare + jitter(0.3));
      job.cardinality_est = 1e6 * std::exp(0.7 * z.cardinality + jitter(0.05));

      // SKU mix drifts towards newer generations as the latent grows.
      std::vector<double> w(config.skus.size());
      double total = 0.0;
      for (std::size_t s = 0; s < w.size(); ++s) {
        const double pos = w.size() == 1 ? 0.0 : static_cast<double>(s) / static_cast<double>(w.size() - 1) - 0.5;
        w[s] = std::exp(pos * z.sku + jitter(0.05));
        total += w[s];
      }
      for (std::size_t s = 0; s < w.size(); ++s) {
        const auto& sku = config.skus[s];
        job.sku_vertex_fraction[sku] = w[s] / total;
        job.cpu_util_mean[sku] = std::clamp(0.35 + 0.08 * z.cpu + jitter(0.02), 0.0, 1.0);
        job.cpu_util_std[sku] = std::max(0.0, 0.05 + 0.03 * z.cpu + jitter(0.005));
      }
      job.true_cluster = static_cast<int>(shape);
      all.push_back(std::move(job));
    }
  }
  Dataset ds;
  ds.groups = group_instances(std::move(all), 1);
  ds.role = DatasetRole::kClusterFit;
  ds.min_support = 1;
  return ds;
}

}  // namespace rvar
