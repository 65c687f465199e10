#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "rvar/clustering.hpp"
#include "rvar/evaluation.hpp"
#include "rvar/forest.hpp"
#include "rvar/shapley.hpp"
#include "rvar/synth.hpp"
#include "rvar/telemetry.hpp"
#include "rvar/whatif.hpp"

namespace rvar {

using Json = nlohmann::json;

inline constexpr int kForestVersion = 1;

// Field names follow the JobInstance members; timestamps are RFC 3339.
// Missing or mistyped fields raise SchemaError.
Json to_json(const JobInstance& job);
JobInstance job_instance_from_json(const Json& j);

Json to_json(const BinningSpec& spec);
BinningSpec binning_spec_from_json(const Json& j);

Json to_json(const GroupPmf& pmf);
Json to_json(const ClusterStats& stats);

// Carries version and both fingerprints; loading recomputes them and raises
// FingerprintMismatch on disagreement.
Json to_json(const ShapeModel& model);
ShapeModel shape_model_from_json(const Json& j);

// Forest files record the schema and the fingerprint of the shape model the
// labels came from. When `expected_shape` is given it must match.
Json to_json(const TreeEnsembleClassifier& model, std::uint64_t shape_fingerprint);
TreeEnsembleClassifier classifier_from_json(const Json& j, std::optional<std::uint64_t> expected_shape = {});
Json to_json(const RegressionForest& model, std::uint64_t shape_fingerprint);
RegressionForest regression_from_json(const Json& j, std::optional<std::uint64_t> expected_shape = {});

Json to_json(const ForestParams& params);
ForestParams forest_params_from_json(const Json& j);

Json to_json(const EvalReport& report);
Json to_json(const ShapleyReport& report);

Json to_json(const Intervention& intervention);
Intervention intervention_from_json(const Json& j);
Json to_json(const ScenarioReport& report);

// A config may name a "preset" and override individual fields.
Json to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const Json& j);

Json read_json_file(const std::string& path);
// Pretty-printed with two-space indent and a trailing newline.
void write_json_file(const std::string& path, const Json& j);

}  // namespace rvar
