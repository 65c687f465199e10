#include <doctest.h>

#include <fstream>
#include <functional>
#include <random>

#include "rvar/error.hpp"
#include "rvar/pipeline.hpp"
#include "rvar/serialize.hpp"
#include "random_trees.hpp"
#include "support.hpp"

using namespace rvar;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an rvar::Error");
  return ErrorCode::kIo;
}

ShapeModel fitted_model() {
  auto ds = generate_workload(rvar::test::small_config(40, 5));
  PipelineConfig cfg;
  cfg.k = 3;
  cfg.seed = 5;
  auto w = pipeline_windows(ds, 0.5, 0.8);
  return cluster_step(ds, cfg, w.fit).fit.model;
}

}  // namespace

TEST_SUITE("serialize") {

TEST_CASE("shape model round trip") {
  const auto m = fitted_model();
  const auto j = to_json(m);
  const auto back = shape_model_from_json(j);
  CHECK(back.fingerprint() == m.fingerprint());
  CHECK(back.centroids == m.centroids);
  CHECK(back.cluster_order == m.cluster_order);
  CHECK(back.spec == m.spec);
  CHECK(to_json(back).dump() == j.dump());

  auto tampered = j;
  tampered["centroids"][0][0] = tampered["centroids"][0][0].get<double>() + 1e-3;
  CHECK(code_of([&] { shape_model_from_json(tampered); }) == ErrorCode::kFingerprintMismatch);

  auto old = j;
  old["version"] = 99;
  CHECK_THROWS_AS(shape_model_from_json(old), Error);
  auto missing = j;
  missing.erase("centroids");
  CHECK(code_of([&] { shape_model_from_json(missing); }) == ErrorCode::kSchema);
}

TEST_CASE("classifier and regression round trip") {
  std::mt19937_64 rng(2);
  std::vector<DecisionTree> trees;
  for (int i = 0; i < 4; ++i) trees.push_back(rvar::test::random_tree(rng, {0, 1, 2}, 4, 3));
  TreeEnsembleClassifier clf(rvar::test::numbered_schema(3), 3, {.n_trees = 4, .seed = 9}, trees);
  const std::uint64_t shape_fp = 0x1234abcdULL;
  const auto j = to_json(clf, shape_fp);
  const auto back = classifier_from_json(j, shape_fp);
  CHECK(back.schema() == clf.schema());
  CHECK(back.params() == clf.params());
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 50; ++i) {
    Eigen::Vector3d x(u(rng), u(rng), u(rng));
    CHECK(back.predict_proba(x) == clf.predict_proba(x));
  }
  CHECK(to_json(back, shape_fp).dump() == j.dump());
  CHECK_NOTHROW(classifier_from_json(j));
  CHECK(code_of([&] { classifier_from_json(j, shape_fp + 1); }) == ErrorCode::kFingerprintMismatch);

  auto renamed = j;
  renamed["features"][0] = "ops[other]";
  CHECK(code_of([&] { classifier_from_json(renamed); }) == ErrorCode::kFingerprintMismatch);

  LabeledSet set;
  set.schema = rvar::test::numbered_schema(2);
  set.features = Eigen::MatrixXd::Random(40, 2);
  for (int i = 0; i < 40; ++i) {
    RowInfo r;
    r.runtime = 10.0 + set.features(i, 0);
    set.rows.push_back(r);
    set.labels.push_back(0);
  }
  auto reg = train_regression_baseline(set, {.n_trees = 3, .seed = 1});
  const auto rj = to_json(reg, shape_fp);
  const auto rback = regression_from_json(rj, shape_fp);
  for (int i = 0; i < 40; ++i) {
    CHECK(rback.predict(set.features.row(i).transpose()) == reg.predict(set.features.row(i).transpose()));
  }
  CHECK(code_of([&] { regression_from_json(rj, 7); }) == ErrorCode::kFingerprintMismatch);
}

TEST_CASE("job instance json") {
  auto job = rvar::test::make_job("etl_daily", 1700000000, 123.5);
  const auto j = to_json(job);
  CHECK(j["submit_time"].is_string());
  CHECK(job_instance_from_json(j) == job);

  auto no_runtime = j;
  no_runtime.erase("runtime");
  CHECK(code_of([&] { job_instance_from_json(no_runtime); }) == ErrorCode::kSchema);
  auto bad_type = j;
  bad_type["vertex_count"] = "many";
  CHECK(code_of([&] { job_instance_from_json(bad_type); }) == ErrorCode::kSchema);
}

TEST_CASE("forest params and interventions") {
  ForestParams p{.n_trees = 7, .max_depth = 3, .min_leaf = 2, .feature_subsample = 0.5, .bootstrap = false, .seed = 11};
  CHECK(forest_params_from_json(to_json(p)) == p);

  Intervention iv{"mix", {SetFeature{"a", 1.0}, ScaleFeature{"b", 0.5}, ShiftSkuFraction{"X", "Y"}}};
  const auto j = to_json(iv);
  CHECK(j["ops"][0]["op"] == "set");
  CHECK(j["ops"][1]["op"] == "scale");
  CHECK(j["ops"][2]["op"] == "shift_sku");
  CHECK(intervention_from_json(j) == iv);
  auto bad = j;
  bad["ops"][0]["op"] = "teleport";
  CHECK_THROWS_AS(intervention_from_json(bad), Error);
}

TEST_CASE("json files") {
  rvar::test::TempDir dir("serialize");
  const Json j = {{"a", 1}, {"b", {1.5, 2.5}}};
  write_json_file(dir.str("x.json"), j);
  CHECK(read_json_file(dir.str("x.json")) == j);
  std::ifstream f(dir.str("x.json"));
  std::string text((std::istreambuf_iterator<char>(f)), {});
  CHECK(text == j.dump(2) + "\n");

  CHECK(code_of([&] { read_json_file(dir.str("missing.json")); }) == ErrorCode::kIo);
  std::ofstream(dir.str("bad.json")) << "{not json";
  CHECK(code_of([&] { read_json_file(dir.str("bad.json")); }) == ErrorCode::kParse);
}

}  // TEST_SUITE
