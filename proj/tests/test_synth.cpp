#include <doctest.h>

#include <cmath>

#include "rvar/distribution.hpp"
#include "rvar/error.hpp"
#include "rvar/serialize.hpp"
#include "rvar/synth.hpp"
#include "support.hpp"

using namespace rvar;

TEST_SUITE("synth") {

TEST_CASE("same seed gives byte-identical datasets") {
  auto c = rvar::test::small_config(20, 9);
  auto dump = [](const Dataset& ds) {
    std::string out;
    for (const auto& g : ds.groups)
      for (const auto& j : g.instances) out += to_json(j).dump() + "\n";
    return out;
  };
  CHECK(dump(generate_workload(c)) == dump(generate_workload(c)));
  auto other = c;
  other.seed = 10;
  CHECK(dump(generate_workload(c)) != dump(generate_workload(other)));
}

TEST_CASE("groups carry true_cluster round-robin and valid instances") {
  auto ds = generate_workload(rvar::test::small_config(8, 1));
  CHECK(ds.groups.size() == 8);
  std::vector<int> per_shape(4, 0);
  for (const auto& g : ds.groups) {
    CHECK(g.support() >= 60);
    CHECK(g.support() <= 90);
    const int shape = *g.instances.front().true_cluster;
    ++per_shape[static_cast<std::size_t>(shape)];
    for (const auto& j : g.instances) {
      CHECK(j.true_cluster == shape);
      CHECK_NOTHROW(validate(j));
    }
  }
  CHECK(per_shape == std::vector<int>{2, 2, 2, 2});
}

TEST_CASE("without outliers every ratio stays inside the modes' support") {
  SynthConfig c;
  c.n_groups = 40;
  c.seed = 4;
  c.shapes = default_shapes();
  for (auto& s : c.shapes) s.outlier_prob = 0.0;
  auto ds = generate_workload(c);
  for (const auto& g : ds.groups) {
    const auto& p = c.shapes[static_cast<std::size_t>(*g.instances.front().true_cluster)];
    // Truncated normal at 4 sigma bounds both modes.
    const double hi = std::max(1.0, p.second_mode_offset) * std::exp(4.0 * p.spread);
    const double lo = std::min(1.0, p.second_mode_weight > 0 ? p.second_mode_offset : 1.0) * std::exp(-4.0 * p.spread);
    std::vector<double> rt;
    for (const auto& j : g.instances) rt.push_back(j.runtime);
    const double lo_obs = *std::min_element(rt.begin(), rt.end());
    const double hi_obs = *std::max_element(rt.begin(), rt.end());
    CHECK(hi_obs / lo_obs <= hi / lo * (1 + 1e-9));
  }
}

TEST_CASE("planted outlier fraction is within 1% of outlier_prob") {
  SynthConfig c;
  c.seed = 21;
  ShapeParams a;
  a.spread = 0.05;
  a.outlier_prob = 0.05;
  a.outlier_scale = 12.0;
  c.shapes = {a, a};
  c.n_groups = 125;
  c.instances_min = c.instances_max = 80;  // 10,000 instances
  auto ds = generate_workload(c);
  CHECK(ds.instance_count() == 10000);
  std::size_t outliers = 0;
  for (const auto& g : ds.groups) {
    // Main-mode runtimes never exceed exp(4 * 0.05) of the median, spikes sit near 12x.
    double base = 1e300;
    for (const auto& j : g.instances) base = std::min(base, j.runtime);
    for (const auto& j : g.instances) outliers += j.runtime > 5.0 * base ? 1 : 0;
  }
  CHECK(std::abs(static_cast<double>(outliers) / 10000.0 - 0.05) <= 0.01);
}

TEST_CASE("same-shape PMFs are closer than cross-shape PMFs without feature noise") {
  auto c = rvar::test::small_config(16, 2);
  c.feature_noise = 0.0;
  auto ds = generate_workload(c);
  std::vector<Eigen::VectorXd> pmfs;
  std::vector<int> shape;
  for (const auto& g : ds.groups) {
    std::vector<double> rt;
    for (const auto& j : g.instances) rt.push_back(j.runtime);
    const double med = lower_median(rt);
    std::vector<double> v;
    for (double r : rt) v.push_back(normalize_runtime(r, med, NormalizationMode::kRatio));
    pmfs.push_back(smooth(histogram(v, BinningSpec::ratio())).probs);
    shape.push_back(*g.instances.front().true_cluster);
  }
  double max_within = 0.0, min_across = 1e300;
  for (std::size_t i = 0; i < pmfs.size(); ++i) {
    for (std::size_t j = i + 1; j < pmfs.size(); ++j) {
      const double d = (pmfs[i] - pmfs[j]).norm();
      if (shape[i] == shape[j]) max_within = std::max(max_within, d);
      else min_across = std::min(min_across, d);
    }
  }
  CHECK(max_within < min_across);
}

TEST_CASE("config validation") {
  auto c = synth_preset("separable");
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.shapes.resize(1);
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.shapes[0].outlier_prob = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = c;
  bad.instances_min = 10;
  bad.instances_max = 5;
  CHECK_THROWS_AS(generate_workload(bad), Error);
  CHECK_THROWS_AS(synth_preset("nope"), Error);
}

TEST_CASE("config JSON round trip and presets") {
  for (const auto& name : synth_preset_names()) {
    auto c = synth_preset(name, 77);
    CHECK(synth_config_from_json(to_json(c)) == c);
  }
  auto c = synth_config_from_json(Json::parse(R"({"preset": "separable", "n_groups": 12, "seed": 3,
                                                 "instances_per_group": [20, 30]})"));
  CHECK(c.n_groups == 12);
  CHECK(c.instances_min == 20);
  CHECK(c.instances_max == 30);
  CHECK(c.k_true() == 4);
  CHECK_THROWS_AS(synth_config_from_json(Json::parse(R"({"preset": "separable", "k_true": 3})")), Error);
}

}  // TEST_SUITE
