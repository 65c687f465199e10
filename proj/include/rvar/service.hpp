#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "rvar/clustering.hpp"
#include "rvar/forest.hpp"
#include "rvar/serialize.hpp"
#include "rvar/telemetry.hpp"

namespace rvar {

// On-disk layout: datasets/, models/{shape,classifier,regression}_<mode>.json, reports/.
class ProjectStore {
 public:
  explicit ProjectStore(std::filesystem::path root);
  // $RVAR_STORE, or ./rvar_store when unset.
  static ProjectStore from_env();

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path datasets() const { return root_ / "datasets"; }
  std::filesystem::path models() const { return root_ / "models"; }
  std::filesystem::path reports() const { return root_ / "reports"; }

  std::filesystem::path dataset_path(const std::string& name) const { return datasets() / (name + ".jsonl"); }
  std::filesystem::path shape_model_path(NormalizationMode mode) const;
  std::filesystem::path classifier_path(NormalizationMode mode) const;
  std::filesystem::path regression_path(NormalizationMode mode) const;
  std::filesystem::path report_path(const std::string& name) const { return reports() / (name + ".json"); }

  // Creates the three subdirectories.
  void ensure() const;

 private:
  std::filesystem::path root_;
};

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON
};

// Request handling without sockets; models are read-only after construction.
class ApiService {
 public:
  // FingerprintMismatch if the classifier was trained on another shape model.
  ApiService(ShapeModel shape_model, const Json& classifier_json, Dataset dataset);

  ApiResponse handle(const std::string& method, const std::string& path,
                     const std::multimap<std::string, std::string>& params, const std::string& body) const;

  const ShapeModel& shape_model() const { return shape_model_; }
  const TreeEnsembleClassifier& classifier() const { return classifier_; }

 private:
  Json clusters() const;
  Json groups(std::size_t limit) const;
  Json group(const std::string& id) const;
  Json predict(const Json& request) const;
  Json whatif(const Json& request) const;

  Eigen::VectorXd resolve_features(const Json& request) const;
  Json prediction_json(const Eigen::VectorXd& x) const;

  ShapeModel shape_model_;
  TreeEnsembleClassifier classifier_;
  Dataset dataset_;
};

// Blocks serving ApiService on host:port until the server is stopped.
// Returns false if the port cannot be bound.
bool serve_http(const ApiService& service, const std::string& host, int port);

}  // namespace rvar
