#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rvar/clustering.hpp"
#include "rvar/features.hpp"
#include "rvar/forest.hpp"

namespace rvar {

struct SetFeature {
  std::string name;
  double value = 0.0;
  bool operator==(const SetFeature&) const = default;
};

struct ScaleFeature {
  std::string name;
  double factor = 1.0;
  bool operator==(const ScaleFeature&) const = default;
};

// Moves the whole vertex fraction of `from_sku` onto `to_sku`. Utilization
// features of either SKU are left alone.
struct ShiftSkuFraction {
  std::string from_sku;
  std::string to_sku;
  bool operator==(const ShiftSkuFraction&) const = default;
};

using InterventionOp = std::variant<SetFeature, ScaleFeature, ShiftSkuFraction>;

struct Intervention {
  std::string name;
  std::vector<InterventionOp> ops;  // applied in order
  bool operator==(const Intervention&) const = default;
};

inline constexpr double kFractionTolerance = 1e-6;

// Applies the ops in place. UnknownFeature for names missing from the schema,
// InvalidFraction if the SKU fractions stop being a (sub-)distribution.
void apply_intervention(Eigen::Ref<Eigen::VectorXd> values, const FeatureSchema& schema,
                        const Intervention& intervention);
FeatureVector apply_intervention(const FeatureVector& fv, const FeatureSchema& schema,
                                 const Intervention& intervention);

// spare-tokens-off, sku-upgrade (from -> to) and load-balance over `skus`.
std::vector<Intervention> builtin_scenarios(const std::vector<std::string>& skus,
                                            const std::string& upgrade_from = "Gen3.5",
                                            const std::string& upgrade_to = "Gen5.2");
// ConfigError for unknown names.
Intervention builtin_scenario(std::string_view name, const std::vector<std::string>& skus);

struct Transition {
  std::size_t from = 0;
  std::size_t to = 0;
  std::size_t count = 0;
  double pct = 0.0;  // share of the before-cluster population
  ClusterStats before;
  ClusterStats after;
};

struct ScenarioReport {
  std::string scenario;
  std::size_t n_jobs = 0;
  Eigen::MatrixXi transition;  // rows = before cluster, cols = after
  double pct_changed = 0.0;  // fraction of jobs whose cluster changed
  // Moves between clusters of different IQR rank.
  std::size_t moved_lower = 0;
  std::size_t moved_higher = 0;
  std::vector<Transition> top_transitions;  // off-diagonal, most frequent first
  std::vector<std::size_t> before;
  std::vector<std::size_t> after;
};

// Rows of `features` follow the classifier schema. EmptyJobSet on zero rows.
ScenarioReport run_scenario(const Eigen::MatrixXd& features, const TreeEnsembleClassifier& classifier,
                            const ShapeModel& shape_model, const Intervention& intervention);

// Transition table plus before/after statistics of the top `top` moves.
std::string format_scenario_report(const ScenarioReport& report, std::size_t top = 3);

}  // namespace rvar
