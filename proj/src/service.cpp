#include "rvar/service.hpp"

#include <cstdlib>
#include <httplib.h>

#include "rvar/error.hpp"
#include "rvar/features.hpp"
#include "rvar/whatif.hpp"

namespace rvar {

namespace {

struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BadRequest : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFingerprintMismatch:
      return 409;
    case ErrorCode::kParse:
    case ErrorCode::kSchema:
    case ErrorCode::kSchemaMismatch:
    case ErrorCode::kUnknownFeature:
    case ErrorCode::kInvalidFraction:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kConfig:
    case ErrorCode::kEmptyJobSet:
      return 400;
    default:
      return 500;
  }
}

ApiResponse error_response(int status, const std::string& msg) { return {status, Json{{"error", msg}}.dump()}; }

}  // namespace

ProjectStore::ProjectStore(std::filesystem::path root) : root_(std::move(root)) {}

ProjectStore ProjectStore::from_env() {
  const char* env = std::getenv("RVAR_STORE");
  return ProjectStore(env && *env ? env : "rvar_store");
}

std::filesystem::path ProjectStore::shape_model_path(NormalizationMode mode) const {
  return models() / ("shape_" + std::string(to_string(mode)) + ".json");
}
std::filesystem::path ProjectStore::classifier_path(NormalizationMode mode) const {
  return models() / ("classifier_" + std::string(to_string(mode)) + ".json");
}
std::filesystem::path ProjectStore::regression_path(NormalizationMode mode) const {
  return models() / ("regression_" + std::string(to_string(mode)) + ".json");
}

void ProjectStore::ensure() const {
  std::error_code ec;
  for (const auto& d : {datasets(), models(), reports()}) {
    std::filesystem::create_directories(d, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create '" + d.string() + "': " + ec.message());
  }
}

ApiService::ApiService(ShapeModel shape_model, const Json& classifier_json, Dataset dataset)
    : shape_model_(std::move(shape_model)),
      classifier_(classifier_from_json(classifier_json, shape_model_.fingerprint())),
      dataset_(std::move(dataset)) {}

ApiResponse ApiService::handle(const std::string& method, const std::string& path,
                               const std::multimap<std::string, std::string>& params, const std::string& body) const {
  try {
    const std::string groups_prefix = "/api/groups/";
    if (method == "GET") {
      if (path == "/api/health") return {200, Json{{"status", "ok"}}.dump()};
      if (path == "/api/clusters") return {200, clusters().dump()};
      if (path == "/api/groups") {
        std::size_t limit = 100;
        if (auto it = params.find("limit"); it != params.end()) {
          try {
            std::size_t used = 0;
            const long v = std::stol(it->second, &used);
            if (used != it->second.size() || v < 0) throw BadRequest("limit must be a non-negative integer");
            limit = static_cast<std::size_t>(v);
          } catch (const std::logic_error&) {
            throw BadRequest("limit must be a non-negative integer");
          }
        }
        return {200, groups(limit).dump()};
      }
      if (path.starts_with(groups_prefix) && path.size() > groups_prefix.size()) {
        return {200, group(path.substr(groups_prefix.size())).dump()};
      }
    } else if (method == "POST" && (path == "/api/predict" || path == "/api/whatif")) {
      Json request;
      try {
        request = Json::parse(body);
      } catch (const nlohmann::json::parse_error& e) {
        throw BadRequest(std::string("malformed JSON body: ") + e.what());
      }
      if (!request.is_object()) throw BadRequest("request body must be a JSON object");
      if (request.contains("shape_model_fingerprint")) {
        const auto& fp = request["shape_model_fingerprint"];
        if (!fp.is_string() || fp.get<std::string>() != to_hex(shape_model_.fingerprint())) {
          return error_response(409, "request targets shape model " + fp.dump() + ", service holds " +
                                         to_hex(shape_model_.fingerprint()));
        }
      }
      return {200, (path == "/api/predict" ? predict(request) : whatif(request)).dump()};
    }
    return error_response(404, "no route for " + method + " " + path);
  } catch (const NotFound& e) {
    return error_response(404, e.what());
  } catch (const BadRequest& e) {
    return error_response(400, e.what());
  } catch (const Error& e) {
    return error_response(status_for(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

Json ApiService::clusters() const {
  const auto& m = shape_model_;
  Json clusters = Json::array();
  for (std::size_t c = 0; c < m.k; ++c) {
    const Eigen::VectorXd row = m.centroids.row(static_cast<Eigen::Index>(c)).transpose();
    clusters.push_back({{"id", c},
                        {"centroid", std::vector<double>(row.data(), row.data() + row.size())},
                        {"stats", to_json(m.stats[c])}});
  }
  return {{"k", m.k},
          {"spec", to_json(m.spec)},
          {"fingerprint", to_hex(m.fingerprint())},
          {"cluster_order", m.cluster_order},
          {"clusters", clusters}};
}

Json ApiService::groups(std::size_t limit) const {
  Json out = Json::array();
  for (const auto& g : dataset_.groups) {
    if (out.size() >= limit) break;
    out.push_back({{"id", g.key.id()},
                   {"normalized_name", g.key.normalized_name},
                   {"plan_signature", to_hex(g.key.plan_signature)},
                   {"support", g.support()}});
  }
  return {{"total", dataset_.groups.size()}, {"groups", out}};
}

Json ApiService::group(const std::string& id) const {
  const JobGroup* g = dataset_.find(id);
  if (!g) throw NotFound("unknown group '" + id + "'");
  std::vector<double> runtimes;
  for (const auto& j : g->instances) runtimes.push_back(j.runtime);
  const double median = lower_median(runtimes);
  const auto values = normalized_runtimes(*g, median, shape_model_.spec.mode);
  auto pmf = histogram(values, shape_model_.spec);
  pmf.group_key = g->key;
  const auto membership = assign_membership(pmf, shape_model_);

  const auto& latest = g->instances.back();
  const auto fv = extract_features(*g, latest, classifier_.schema());
  Json features = Json::object();
  for (std::size_t i = 0; i < classifier_.schema().size(); ++i) {
    features[classifier_.schema().name(i)] = fv.values[static_cast<Eigen::Index>(i)];
  }
  return {{"id", id},
          {"normalized_name", g->key.normalized_name},
          {"support", g->support()},
          {"median", median},
          {"pmf", to_json(pmf)},
          {"membership",
           {{"cluster_id", membership.cluster_id},
            {"log_likelihoods",
             std::vector<double>(membership.log_likelihoods.data(),
                                 membership.log_likelihoods.data() + membership.log_likelihoods.size())},
            {"stats", to_json(shape_model_.stats[membership.cluster_id])}}},
          {"latest_instance", latest.job_id},
          {"features", features},
          {"prediction", prediction_json(fv.values)}};
}

Eigen::VectorXd ApiService::resolve_features(const Json& request) const {
  const auto& schema = classifier_.schema();
  if (request.contains("features")) {
    const auto& f = request["features"];
    Eigen::VectorXd x(static_cast<Eigen::Index>(schema.size()));
    if (f.is_array()) {
      if (f.size() != schema.size()) {
        throw BadRequest("expected " + std::to_string(schema.size()) + " feature values, got " +
                         std::to_string(f.size()));
      }
      for (std::size_t i = 0; i < f.size(); ++i) x[static_cast<Eigen::Index>(i)] = f[i].get<double>();
      return x;
    }
    if (!f.is_object()) throw BadRequest("features must be an object or an array");
    std::vector<bool> seen(schema.size(), false);
    for (const auto& [name, v] : f.items()) {
      const auto i = schema.require(name);
      x[static_cast<Eigen::Index>(i)] = v.get<double>();
      seen[i] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (!seen[i]) throw BadRequest("missing feature '" + schema.name(i) + "'");
    }
    return x;
  }
  if (request.contains("instance_id")) {
    const auto id = request["instance_id"].get<std::string>();
    for (const auto& g : dataset_.groups) {
      for (const auto& j : g.instances) {
        if (j.job_id == id) return extract_features(g, j, schema).values;
      }
    }
    throw NotFound("unknown instance '" + id + "'");
  }
  for (const char* key : {"group_key", "group_id"}) {
    if (!request.contains(key)) continue;
    const auto id = request[key].get<std::string>();
    const JobGroup* g = dataset_.find(id);
    if (!g) throw NotFound("unknown group '" + id + "'");
    return extract_features(*g, g->instances.back(), schema).values;
  }
  throw BadRequest("request needs one of features, instance_id or group_key");
}

Json ApiService::prediction_json(const Eigen::VectorXd& x) const {
  const auto p = classifier_.predict_proba(x);
  const auto c = static_cast<std::size_t>(argmax_lowest(p));
  return {{"cluster", c},
          {"probabilities", std::vector<double>(p.data(), p.data() + p.size())},
          {"stats", to_json(shape_model_.stats[c])}};
}

Json ApiService::predict(const Json& request) const {
  const auto x = resolve_features(request);
  return prediction_json(x);
}

Json ApiService::whatif(const Json& request) const {
  const auto x = resolve_features(request);
  Intervention intervention;
  if (request.contains("scenario")) {
    intervention = builtin_scenario(request["scenario"].get<std::string>(), classifier_.schema().skus());
  } else if (request.contains("intervention")) {
    intervention = intervention_from_json(request["intervention"]);
  }
  Eigen::VectorXd after = x;
  apply_intervention(after, classifier_.schema(), intervention);
  Eigen::MatrixXd one = x.transpose();
  const auto report = run_scenario(one, classifier_, shape_model_, intervention);
  const auto before_json = prediction_json(x);
  const auto after_json = prediction_json(after);
  return {{"intervention", to_json(intervention)},
          {"before", before_json},
          {"after", after_json},
          {"changed", before_json["cluster"] != after_json["cluster"]},
          {"report", to_json(report)}};
}

bool serve_http(const ApiService& service, const std::string& host, int port) {
  httplib::Server server;
  auto bridge = [&service](const httplib::Request& req, httplib::Response& res) {
    std::multimap<std::string, std::string> params(req.params.begin(), req.params.end());
    const auto r = service.handle(req.method, req.path, params, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Get(R"(/api/.*)", bridge);
  server.Post(R"(/api/.*)", bridge);
  return server.listen(host, port);
}

}  // namespace rvar
