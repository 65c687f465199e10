#include "rvar/serialize.hpp"

#include <fstream>
#include <sstream>

#include "rvar/error.hpp"

namespace rvar {

namespace {

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.is_object()) throw Error(ErrorCode::kSchema, "expected a JSON object");
  const auto it = j.find(key);
  if (it == j.end()) throw Error(ErrorCode::kSchema, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kSchema, std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T field_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return field<T>(j, key);
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& rows, const char* what) {
  if (!rows.is_array()) throw Error(ErrorCode::kSchema, std::string(what) + " must be an array of rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = n ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != m) {
      throw Error(ErrorCode::kSchema, std::string(what) + " rows differ in length");
    }
    for (Eigen::Index j = 0; j < m; ++j) out(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return out;
}

Json vector_to_json(const Eigen::VectorXd& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from_json(const Json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_version(const Json& j, const char* kind, int version) {
  const auto k = field<std::string>(j, "kind");
  if (k != kind) throw Error(ErrorCode::kSchema, "expected a " + std::string(kind) + " file, got '" + k + "'");
  const auto v = field<int>(j, "version");
  if (v != version) {
    throw Error(ErrorCode::kSchema, std::string(kind) + " version " + std::to_string(v) + " is not supported");
  }
}

Json trees_to_json(const std::vector<DecisionTree>& trees) {
  Json out = Json::array();
  for (const auto& t : trees) {
    Json feature = Json::array(), threshold = Json::array(), left = Json::array(), right = Json::array(),
         value = Json::array(), gain = Json::array();
    for (const auto& n : t.nodes()) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(vector_to_json(n.value));
      gain.push_back(n.weighted_impurity_decrease);
    }
    out.push_back({{"feature", feature},
                   {"threshold", threshold},
                   {"left", left},
                   {"right", right},
                   {"value", value},
                   {"impurity_decrease", gain}});
  }
  return out;
}

std::vector<DecisionTree> trees_from_json(const Json& j, std::size_t n_features, std::size_t leaf_width) {
  if (!j.is_array()) throw Error(ErrorCode::kSchema, "trees must be an array");
  std::vector<DecisionTree> trees;
  for (const auto& t : j) {
    const auto feature = field<std::vector<int>>(t, "feature");
    const auto threshold = field<std::vector<double>>(t, "threshold");
    const auto left = field<std::vector<int>>(t, "left");
    const auto right = field<std::vector<int>>(t, "right");
    const auto gain = field<std::vector<double>>(t, "impurity_decrease");
    const auto& value = t.at("value");
    const auto n = feature.size();
    if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n || gain.size() != n ||
        value.size() != n) {
      throw Error(ErrorCode::kSchema, "tree arrays differ in length");
    }
    std::vector<TreeNode> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& node = nodes[i];
      node.feature = feature[i];
      node.threshold = threshold[i];
      node.left = left[i];
      node.right = right[i];
      node.weighted_impurity_decrease = gain[i];
      node.value = vector_from_json(value[i]);
      const auto in_range = [n](int c) { return c > 0 && static_cast<std::size_t>(c) < n; };
      if (node.feature >= 0) {
        if (static_cast<std::size_t>(node.feature) >= n_features || !in_range(node.left) || !in_range(node.right)) {
          throw Error(ErrorCode::kSchema, "tree node " + std::to_string(i) + " is malformed");
        }
      } else if (static_cast<std::size_t>(node.value.size()) != leaf_width) {
        throw Error(ErrorCode::kSchema, "tree leaf " + std::to_string(i) + " has the wrong width");
      }
    }
    trees.emplace_back(std::move(nodes));
  }
  if (trees.empty()) throw Error(ErrorCode::kSchema, "forest has no trees");
  return trees;
}

void check_shape_binding(const Json& j, std::optional<std::uint64_t> expected) {
  if (!expected) return;
  const auto stored = from_hex(field<std::string>(j, "shape_model_fingerprint"));
  if (stored != *expected) {
    throw Error(ErrorCode::kFingerprintMismatch, "model was trained against shape model " + to_hex(stored) +
                                                     ", loaded shape model is " + to_hex(*expected));
  }
}

FeatureSchema schema_from_json(const Json& j) {
  FeatureSchema schema(field<std::vector<std::string>>(j, "features"));
  const auto stored = from_hex(field<std::string>(j, "schema_fingerprint"));
  if (stored != schema.fingerprint()) throw Error(ErrorCode::kFingerprintMismatch, "feature schema fingerprint differs");
  return schema;
}

}  // namespace

// ---- telemetry --------------------------------------------------------------

Json to_json(const JobInstance& job) {
  Json nodes = Json::array();
  for (const auto& n : job.plan.nodes) nodes.push_back({{"operator_type", n.operator_type}, {"children", n.children}});
  Json j = {{"job_id", job.job_id},
            {"raw_name", job.raw_name},
            {"submit_time", format_rfc3339(job.submit_time)},
            {"runtime", job.runtime},
            {"plan", {{"nodes", nodes}}},
            {"input_bytes", job.input_bytes},
            {"temp_read_bytes", job.temp_read_bytes},
            {"vertex_count", job.vertex_count},
            {"token_alloc", job.token_alloc},
            {"token_min", job.token_min},
            {"token_max", job.token_max},
            {"token_avg", job.token_avg},
            {"spare_token_avg", job.spare_token_avg},
            {"sku_vertex_fraction", job.sku_vertex_fraction},
            {"cpu_util_mean", job.cpu_util_mean},
            {"cpu_util_std", job.cpu_util_std},
            {"cardinality_est", job.cardinality_est},
            {"operator_counts", job.operator_counts}};
  if (job.true_cluster) j["true_cluster"] = *job.true_cluster;
  return j;
}

JobInstance job_instance_from_json(const Json& j) {
  JobInstance job;
  job.job_id = field<std::string>(j, "job_id");
  job.raw_name = field<std::string>(j, "raw_name");
  job.submit_time = parse_rfc3339(field<std::string>(j, "submit_time"));
  job.runtime = field<double>(j, "runtime");
  const auto plan = field<Json>(j, "plan");
  for (const auto& n : field<Json>(plan, "nodes")) {
    job.plan.nodes.push_back({field<std::string>(n, "operator_type"), field_or<std::vector<std::size_t>>(n, "children", {})});
  }
  job.input_bytes = field<double>(j, "input_bytes");
  job.temp_read_bytes = field<double>(j, "temp_read_bytes");
  job.vertex_count = field<double>(j, "vertex_count");
  job.token_alloc = field<double>(j, "token_alloc");
  job.token_min = field<double>(j, "token_min");
  job.token_max = field<double>(j, "token_max");
  job.token_avg = field<double>(j, "token_avg");
  job.spare_token_avg = field<double>(j, "spare_token_avg");
  job.cardinality_est = field<double>(j, "cardinality_est");
  job.sku_vertex_fraction = field_or<SkuMap>(j, "sku_vertex_fraction", {});
  job.cpu_util_mean = field_or<SkuMap>(j, "cpu_util_mean", {});
  job.cpu_util_std = field_or<SkuMap>(j, "cpu_util_std", {});
  job.operator_counts = field_or<std::map<std::string, double>>(j, "operator_counts", {});
  if (j.contains("true_cluster") && !j["true_cluster"].is_null()) job.true_cluster = field<int>(j, "true_cluster");
  validate(job);
  return job;
}

// ---- distributions and shapes ------------------------------------------------

Json to_json(const BinningSpec& spec) {
  return {{"mode", to_string(spec.mode)}, {"lo", spec.lo}, {"hi", spec.hi}, {"n_interior", spec.n_interior}};
}

BinningSpec binning_spec_from_json(const Json& j) {
  BinningSpec s;
  try {
    s.mode = parse_normalization_mode(field<std::string>(j, "mode"));
  } catch (const Error& e) {
    throw Error(ErrorCode::kSchema, e.what());
  }
  s.lo = field<double>(j, "lo");
  s.hi = field<double>(j, "hi");
  s.n_interior = field<std::size_t>(j, "n_interior");
  s.validate();
  return s;
}

Json to_json(const GroupPmf& pmf) {
  Json j = {{"spec", to_json(pmf.spec)}, {"probs", vector_to_json(pmf.probs)}, {"n_samples", pmf.n_samples}};
  if (pmf.group_key) j["group_id"] = pmf.group_key->id();
  return j;
}

Json to_json(const ClusterStats& s) {
  return {{"outlier_pct", s.outlier_pct},         {"iqr_25_75", s.iqr_25_75},
          {"p95", s.p95},                         {"std", s.std},
          {"job_share", s.job_share},             {"n_groups", s.n_groups},
          {"upper_tail_mean", s.upper_tail_mean}, {"lower_tail_mean", s.lower_tail_mean}};
}

namespace {

ClusterStats cluster_stats_from_json(const Json& j) {
  ClusterStats s;
  s.outlier_pct = field<double>(j, "outlier_pct");
  s.iqr_25_75 = field<double>(j, "iqr_25_75");
  s.p95 = field<double>(j, "p95");
  s.std = field<double>(j, "std");
  s.job_share = field<double>(j, "job_share");
  s.n_groups = field<std::size_t>(j, "n_groups");
  s.upper_tail_mean = field<double>(j, "upper_tail_mean");
  s.lower_tail_mean = field<double>(j, "lower_tail_mean");
  return s;
}

}  // namespace

Json to_json(const ShapeModel& model) {
  Json stats = Json::array();
  for (const auto& s : model.stats) stats.push_back(to_json(s));
  return {{"kind", "shape_model"},
          {"version", ShapeModel::kVersion},
          {"spec", to_json(model.spec)},
          {"spec_fingerprint", to_hex(model.spec.fingerprint())},
          {"fingerprint", to_hex(model.fingerprint())},
          {"k", model.k},
          {"centroids", matrix_to_json(model.centroids)},
          {"stats", stats},
          {"cluster_order", model.cluster_order}};
}

ShapeModel shape_model_from_json(const Json& j) {
  check_version(j, "shape_model", ShapeModel::kVersion);
  ShapeModel m;
  m.spec = binning_spec_from_json(field<Json>(j, "spec"));
  if (from_hex(field<std::string>(j, "spec_fingerprint")) != m.spec.fingerprint()) {
    throw Error(ErrorCode::kFingerprintMismatch, "binning spec fingerprint differs");
  }
  m.k = field<std::size_t>(j, "k");
  m.centroids = matrix_from_json(field<Json>(j, "centroids"), "centroids");
  if (static_cast<std::size_t>(m.centroids.rows()) != m.k ||
      static_cast<std::size_t>(m.centroids.cols()) != m.spec.bins()) {
    throw Error(ErrorCode::kSchema, "centroid matrix does not match k x bins");
  }
  for (const auto& s : field<Json>(j, "stats")) m.stats.push_back(cluster_stats_from_json(s));
  if (m.stats.size() != m.k) throw Error(ErrorCode::kSchema, "expected one stats entry per cluster");
  m.cluster_order = field<std::vector<std::size_t>>(j, "cluster_order");
  if (m.cluster_order.size() != m.k) throw Error(ErrorCode::kSchema, "cluster_order must list every cluster");
  m.log_centroids = floored_log(m.centroids);
  if (from_hex(field<std::string>(j, "fingerprint")) != m.fingerprint()) {
    throw Error(ErrorCode::kFingerprintMismatch, "shape model fingerprint differs from its centroids");
  }
  return m;
}

// ---- forests -----------------------------------------------------------------

Json to_json(const ForestParams& p) {
  return {{"n_trees", p.n_trees},
          {"max_depth", p.max_depth},
          {"min_leaf", p.min_leaf},
          {"feature_subsample", p.feature_subsample},
          {"bootstrap", p.bootstrap},
          {"seed", p.seed}};
}

ForestParams forest_params_from_json(const Json& j) {
  ForestParams p;
  p.n_trees = field_or<std::size_t>(j, "n_trees", p.n_trees);
  p.max_depth = field_or<std::size_t>(j, "max_depth", p.max_depth);
  p.min_leaf = field_or<std::size_t>(j, "min_leaf", p.min_leaf);
  p.feature_subsample = field_or<double>(j, "feature_subsample", p.feature_subsample);
  p.bootstrap = field_or<bool>(j, "bootstrap", p.bootstrap);
  p.seed = field_or<std::uint64_t>(j, "seed", p.seed);
  return p;
}

Json to_json(const TreeEnsembleClassifier& model, std::uint64_t shape_fingerprint) {
  return {{"kind", "classifier"},
          {"version", kForestVersion},
          {"features", model.schema().names()},
          {"schema_fingerprint", to_hex(model.schema().fingerprint())},
          {"shape_model_fingerprint", to_hex(shape_fingerprint)},
          {"n_classes", model.n_classes()},
          {"params", to_json(model.params())},
          {"trees", trees_to_json(model.trees())}};
}

TreeEnsembleClassifier classifier_from_json(const Json& j, std::optional<std::uint64_t> expected_shape) {
  check_version(j, "classifier", kForestVersion);
  check_shape_binding(j, expected_shape);
  auto schema = schema_from_json(j);
  const auto n_classes = field<std::size_t>(j, "n_classes");
  auto trees = trees_from_json(field<Json>(j, "trees"), schema.size(), n_classes);
  return TreeEnsembleClassifier(std::move(schema), n_classes, forest_params_from_json(field<Json>(j, "params")),
                                std::move(trees));
}

Json to_json(const RegressionForest& model, std::uint64_t shape_fingerprint) {
  return {{"kind", "regression"},
          {"version", kForestVersion},
          {"features", model.schema().names()},
          {"schema_fingerprint", to_hex(model.schema().fingerprint())},
          {"shape_model_fingerprint", to_hex(shape_fingerprint)},
          {"params", to_json(model.params())},
          {"trees", trees_to_json(model.trees())}};
}

RegressionForest regression_from_json(const Json& j, std::optional<std::uint64_t> expected_shape) {
  check_version(j, "regression", kForestVersion);
  check_shape_binding(j, expected_shape);
  auto schema = schema_from_json(j);
  auto trees = trees_from_json(field<Json>(j, "trees"), schema.size(), 1);
  return RegressionForest(std::move(schema), forest_params_from_json(field<Json>(j, "params")), std::move(trees));
}

// ---- reports -----------------------------------------------------------------

Json to_json(const EvalReport& r) {
  Json buckets = Json::array();
  for (const auto& b : r.accuracy_by_occurrence) {
    buckets.push_back({{"bucket", b.name}, {"count", b.count}, {"accuracy", b.accuracy}});
  }
  Json importance = Json::array();
  for (const auto& [name, v] : r.gini_importance) importance.push_back({{"feature", name}, {"importance", v}});
  Json predictions = Json::array();
  for (const auto& p : r.predictions) {
    predictions.push_back({{"instance_id", p.instance_id}, {"label", p.label}, {"predicted", p.predicted}});
  }
  return {{"n_test", r.n_test},
          {"accuracy", r.accuracy},
          {"confusion", matrix_to_json(r.confusion)},
          {"confusion_counts", matrix_to_json(r.confusion_counts)},
          {"accuracy_by_occurrence", buckets},
          {"gini_importance", importance},
          {"distribution",
           {{"n_jobs", r.n_distribution_rows},
            {"classification", {{"qq_mae", r.classification.qq_mae}, {"ks", r.classification.ks}}},
            {"regression", {{"qq_mae", r.regression.qq_mae}, {"ks", r.regression.ks}}}}},
          {"predictions", predictions}};
}

Json to_json(const ShapleyReport& r) {
  Json values = Json::array();
  for (Eigen::Index j = 0; j < r.values.size(); ++j) {
    const auto name = static_cast<std::size_t>(j) < r.feature_names.size() ? r.feature_names[static_cast<std::size_t>(j)]
                                                                            : std::to_string(j);
    values.push_back({{"feature", name}, {"feature_value", r.feature_values[j]}, {"shapley_value", r.values[j]}});
  }
  return {{"instance_id", r.instance_id},
          {"target_class", r.target_class},
          {"baseline", r.baseline},
          {"fx", r.fx},
          {"n_permutations", r.n_permutations},
          {"efficiency_gap", r.efficiency_gap()},
          {"values", values}};
}

Json to_json(const Intervention& intervention) {
  Json ops = Json::array();
  for (const auto& op : intervention.ops) {
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, SetFeature>) {
            ops.push_back({{"op", "set"}, {"feature", o.name}, {"value", o.value}});
          } else if constexpr (std::is_same_v<T, ScaleFeature>) {
            ops.push_back({{"op", "scale"}, {"feature", o.name}, {"factor", o.factor}});
          } else {
            ops.push_back({{"op", "shift_sku"}, {"from", o.from_sku}, {"to", o.to_sku}});
          }
        },
        op);
  }
  return {{"name", intervention.name}, {"ops", ops}};
}

Intervention intervention_from_json(const Json& j) {
  Intervention out;
  out.name = field_or<std::string>(j, "name", "custom");
  for (const auto& op : field_or<Json>(j, "ops", Json::array())) {
    const auto kind = field<std::string>(op, "op");
    if (kind == "set") {
      out.ops.emplace_back(SetFeature{field<std::string>(op, "feature"), field<double>(op, "value")});
    } else if (kind == "scale") {
      out.ops.emplace_back(ScaleFeature{field<std::string>(op, "feature"), field<double>(op, "factor")});
    } else if (kind == "shift_sku") {
      out.ops.emplace_back(ShiftSkuFraction{field<std::string>(op, "from"), field<std::string>(op, "to")});
    } else {
      throw Error(ErrorCode::kSchema, "unknown intervention op '" + kind + "'");
    }
  }
  return out;
}

Json to_json(const ScenarioReport& r) {
  Json transition = Json::array();
  for (Eigen::Index i = 0; i < r.transition.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < r.transition.cols(); ++j) row.push_back(r.transition(i, j));
    transition.push_back(std::move(row));
  }
  Json top = Json::array();
  for (const auto& t : r.top_transitions) {
    top.push_back({{"from", t.from},
                   {"to", t.to},
                   {"count", t.count},
                   {"pct", t.pct},
                   {"stats_before", to_json(t.before)},
                   {"stats_after", to_json(t.after)}});
  }
  return {{"scenario", r.scenario},
          {"n_jobs", r.n_jobs},
          {"transition", transition},
          {"pct_changed", r.pct_changed},
          {"moved_lower", r.moved_lower},
          {"moved_higher", r.moved_higher},
          {"top_transitions", top}};
}

// ---- synthetic config --------------------------------------------------------

Json to_json(const SynthConfig& c) {
  Json shapes = Json::array();
  for (const auto& s : c.shapes) {
    shapes.push_back({{"median_range", {s.median_min, s.median_max}},
                      {"second_mode_offset", s.second_mode_offset},
                      {"second_mode_weight", s.second_mode_weight},
                      {"spread", s.spread},
                      {"outlier_prob", s.outlier_prob},
                      {"outlier_scale", s.outlier_scale}});
  }
  return {{"n_groups", c.n_groups},
          {"instances_per_group", {c.instances_min, c.instances_max}},
          {"k_true", c.k_true()},
          {"shape_params", shapes},
          {"feature_noise", c.feature_noise},
          {"signal", to_string(c.signal)},
          {"seed", c.seed},
          {"start_time", format_rfc3339(c.start_time)},
          {"span_seconds", c.span_seconds},
          {"skus", c.skus}};
}

SynthConfig synth_config_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "synth config must be a JSON object");
  try {
    SynthConfig c;
    c.shapes = default_shapes();
    if (j.contains("preset")) c = synth_preset(field<std::string>(j, "preset"));
    c.n_groups = field_or<std::size_t>(j, "n_groups", c.n_groups);
    if (j.contains("instances_per_group")) {
      const auto range = field<std::vector<std::size_t>>(j, "instances_per_group");
      if (range.size() != 2) throw Error(ErrorCode::kConfig, "instances_per_group must be [min, max]");
      c.instances_min = range[0];
      c.instances_max = range[1];
    }
    if (j.contains("shape_params")) {
      c.shapes.clear();
      for (const auto& s : field<Json>(j, "shape_params")) {
        ShapeParams p;
        if (s.contains("median_range")) {
          const auto r = field<std::vector<double>>(s, "median_range");
          if (r.size() != 2) throw Error(ErrorCode::kConfig, "median_range must be [min, max]");
          p.median_min = r[0];
          p.median_max = r[1];
        }
        p.second_mode_offset = field_or<double>(s, "second_mode_offset", p.second_mode_offset);
        p.second_mode_weight = field_or<double>(s, "second_mode_weight", p.second_mode_weight);
        p.spread = field_or<double>(s, "spread", p.spread);
        p.outlier_prob = field_or<double>(s, "outlier_prob", p.outlier_prob);
        p.outlier_scale = field_or<double>(s, "outlier_scale", p.outlier_scale);
        c.shapes.push_back(p);
      }
    }
    if (j.contains("k_true") && field<std::size_t>(j, "k_true") != c.shapes.size()) {
      throw Error(ErrorCode::kConfig, "k_true disagrees with the number of shape_params");
    }
    c.feature_noise = field_or<double>(j, "feature_noise", c.feature_noise);
    if (j.contains("signal")) c.signal = parse_feature_signal(field<std::string>(j, "signal"));
    c.seed = field_or<std::uint64_t>(j, "seed", c.seed);
    if (j.contains("start_time")) c.start_time = parse_rfc3339(field<std::string>(j, "start_time"));
    c.span_seconds = field_or<std::int64_t>(j, "span_seconds", c.span_seconds);
    c.skus = field_or<std::vector<std::string>>(j, "skus", c.skus);
    c.validate();
    return c;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    throw Error(ErrorCode::kConfig, e.what());
  }
}

// ---- files -------------------------------------------------------------------

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failure on '" + path + "'");
}

}  // namespace rvar
