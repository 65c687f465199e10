#include "rvar/whatif.hpp"

#include <algorithm>
#include <cstdio>

#include "rvar/error.hpp"

namespace rvar {

namespace {

std::string fraction_name(const std::string& sku) { return "sku_vertex_fraction[" + sku + "]"; }

void check_fractions(const Eigen::Ref<Eigen::VectorXd>& values, const FeatureSchema& schema) {
  double sum = 0.0;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema.entry(i).source != FeatureSchema::Source::kSkuFraction) continue;
    const double v = values[static_cast<Eigen::Index>(i)];
    if (!(v >= -kFractionTolerance && v <= 1.0 + kFractionTolerance)) {
      throw Error(ErrorCode::kInvalidFraction, schema.name(i) + " = " + std::to_string(v) + " is outside [0,1]");
    }
    sum += v;
  }
  if (sum > 1.0 + kFractionTolerance) {
    throw Error(ErrorCode::kInvalidFraction, "SKU fractions sum to " + std::to_string(sum));
  }
}

}  // namespace

void apply_intervention(Eigen::Ref<Eigen::VectorXd> values, const FeatureSchema& schema,
                        const Intervention& intervention) {
  if (static_cast<std::size_t>(values.size()) != schema.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "feature vector width differs from the schema");
  }
  for (const auto& op : intervention.ops) {
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, SetFeature>) {
            values[static_cast<Eigen::Index>(schema.require(o.name))] = o.value;
          } else if constexpr (std::is_same_v<T, ScaleFeature>) {
            values[static_cast<Eigen::Index>(schema.require(o.name))] *= o.factor;
          } else {
            const auto from = static_cast<Eigen::Index>(schema.require(fraction_name(o.from_sku)));
            const auto to = static_cast<Eigen::Index>(schema.require(fraction_name(o.to_sku)));
            if (from == to) return;
            values[to] += values[from];
            values[from] = 0.0;
          }
        },
        op);
  }
  check_fractions(values, schema);
}

FeatureVector apply_intervention(const FeatureVector& fv, const FeatureSchema& schema,
                                 const Intervention& intervention) {
  FeatureVector out = fv;
  apply_intervention(out.values, schema, intervention);
  return out;
}

std::vector<Intervention> builtin_scenarios(const std::vector<std::string>& skus, const std::string& upgrade_from,
                                            const std::string& upgrade_to) {
  Intervention spare{"spare-tokens-off", {SetFeature{"spare_token_avg", 0.0}}};
  Intervention upgrade{"sku-upgrade", {ShiftSkuFraction{upgrade_from, upgrade_to}}};
  Intervention balance{"load-balance", {}};
  for (const auto& s : skus) balance.ops.push_back(SetFeature{"cpu_util_std[" + s + "]", 0.0});
  return {spare, upgrade, balance};
}

Intervention builtin_scenario(std::string_view name, const std::vector<std::string>& skus) {
  for (auto& s : builtin_scenarios(skus)) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::kConfig, "unknown scenario '" + std::string(name) + "'");
}

ScenarioReport run_scenario(const Eigen::MatrixXd& features, const TreeEnsembleClassifier& classifier,
                            const ShapeModel& shape_model, const Intervention& intervention) {
  if (features.rows() == 0) throw Error(ErrorCode::kEmptyJobSet, "no jobs to run the scenario on");
  if (classifier.n_classes() != shape_model.k) {
    throw Error(ErrorCode::kSchemaMismatch, "classifier classes differ from the shape model's k");
  }
  const auto k = static_cast<Eigen::Index>(shape_model.k);
  ScenarioReport r;
  r.scenario = intervention.name;
  r.n_jobs = static_cast<std::size_t>(features.rows());
  r.transition = Eigen::MatrixXi::Zero(k, k);

  std::vector<std::size_t> rank(shape_model.k);
  for (std::size_t i = 0; i < shape_model.cluster_order.size(); ++i) rank[shape_model.cluster_order[i]] = i;

  Eigen::VectorXd x(features.cols());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    x = features.row(i).transpose();
    const auto before = classifier.predict(x);
    apply_intervention(x, classifier.schema(), intervention);
    const auto after = classifier.predict(x);
    r.before.push_back(before);
    r.after.push_back(after);
    ++r.transition(static_cast<Eigen::Index>(before), static_cast<Eigen::Index>(after));
    if (rank[after] < rank[before]) ++r.moved_lower;
    if (rank[after] > rank[before]) ++r.moved_higher;
  }
  const auto unchanged = r.transition.diagonal().sum();
  r.pct_changed = 1.0 - static_cast<double>(unchanged) / static_cast<double>(r.n_jobs);

  for (Eigen::Index i = 0; i < k; ++i) {
    const double row_total = r.transition.row(i).sum();
    for (Eigen::Index j = 0; j < k; ++j) {
      if (i == j || r.transition(i, j) == 0) continue;
      Transition t;
      t.from = static_cast<std::size_t>(i);
      t.to = static_cast<std::size_t>(j);
      t.count = static_cast<std::size_t>(r.transition(i, j));
      t.pct = static_cast<double>(t.count) / row_total;
      t.before = shape_model.stats[t.from];
      t.after = shape_model.stats[t.to];
      r.top_transitions.push_back(t);
    }
  }
  std::stable_sort(r.top_transitions.begin(), r.top_transitions.end(),
                   [](const Transition& a, const Transition& b) { return a.count > b.count; });
  return r;
}

std::string format_scenario_report(const ScenarioReport& report, std::size_t top) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "scenario %s: %zu jobs, %.2f%% changed cluster (%zu to lower IQR, %zu to higher)\n",
                report.scenario.c_str(), report.n_jobs, 100.0 * report.pct_changed, report.moved_lower,
                report.moved_higher);
  out += buf;
  out += "transitions (rows = before, cols = after):\n     ";
  for (Eigen::Index j = 0; j < report.transition.cols(); ++j) {
    std::snprintf(buf, sizeof buf, " %7ld", static_cast<long>(j));
    out += buf;
  }
  out += '\n';
  for (Eigen::Index i = 0; i < report.transition.rows(); ++i) {
    std::snprintf(buf, sizeof buf, "  %2ld |", static_cast<long>(i));
    out += buf;
    for (Eigen::Index j = 0; j < report.transition.cols(); ++j) {
      std::snprintf(buf, sizeof buf, " %7d", report.transition(i, j));
      out += buf;
    }
    out += '\n';
  }
  for (std::size_t t = 0; t < std::min(top, report.top_transitions.size()); ++t) {
    const auto& tr = report.top_transitions[t];
    std::snprintf(buf, sizeof buf,
                  "%zu -> %zu: %zu jobs (%.1f%% of cluster %zu)\n"
                  "  outlier%% %6.2f -> %6.2f  iqr %.3f -> %.3f  p95 %.3f -> %.3f  std %.3f -> %.3f\n",
                  tr.from, tr.to, tr.count, 100.0 * tr.pct, tr.from, 100.0 * tr.before.outlier_pct,
                  100.0 * tr.after.outlier_pct, tr.before.iqr_25_75, tr.after.iqr_25_75, tr.before.p95, tr.after.p95,
                  tr.before.std, tr.after.std);
    out += buf;
  }
  return out;
}

}  // namespace rvar
