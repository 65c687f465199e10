#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rvar/synth.hpp"
#include "rvar/telemetry.hpp"

namespace rvar::test {

inline JobInstance make_job(const std::string& name, Timestamp t, double runtime, const std::string& id = {}) {
  JobInstance j;
  j.job_id = id.empty() ? name + "@" + std::to_string(t) : id;
  j.raw_name = name;
  j.submit_time = t;
  j.runtime = runtime;
  j.plan.nodes = {{"Output", {1}}, {"Extract", {}}};
  j.vertex_count = 10;
  j.token_alloc = 20;
  j.token_min = 5;
  j.token_max = 25;
  j.token_avg = 15;
  j.input_bytes = 1e9;
  j.temp_read_bytes = 1e8;
  j.cardinality_est = 1e5;
  j.sku_vertex_fraction = {{"Gen3.5", 0.5}, {"Gen5.2", 0.5}};
  j.cpu_util_mean = {{"Gen3.5", 0.4}, {"Gen5.2", 0.3}};
  j.cpu_util_std = {{"Gen3.5", 0.05}, {"Gen5.2", 0.04}};
  j.operator_counts = {{"Extract", 1}, {"Output", 1}};
  return j;
}

inline JobGroup make_group(const std::vector<double>& runtimes, Timestamp t0 = 1000, Timestamp step = 100) {
  std::vector<JobInstance> jobs;
  for (std::size_t i = 0; i < runtimes.size(); ++i) {
    jobs.push_back(make_job("G", t0 + static_cast<Timestamp>(i) * step, runtimes[i]));
  }
  return group_instances(std::move(jobs), 1).at(0);
}

inline SynthConfig small_config(std::size_t groups, std::uint64_t seed, const char* preset = "separable") {
  auto c = synth_preset(preset, seed);
  c.n_groups = groups;
  return c;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("rvar_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& leaf) const { return (path_ / leaf).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace rvar::test
