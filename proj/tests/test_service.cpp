#include <doctest.h>

#include <unistd.h>

#include <chrono>
#include <memory>
#include <thread>

#include "rvar/error.hpp"
#include "rvar/pipeline.hpp"
#include "rvar/service.hpp"
#include "rvar/synth.hpp"
#include "support.hpp"

// After Eigen: glibc resolv.h defines _res, which Eigen uses as a parameter name.
#include <httplib.h>

using namespace rvar;

namespace {

struct Fixture {
  Dataset ds;
  PipelineResult result;
  std::unique_ptr<ApiService> service;

  Fixture() {
    ds = generate_workload(rvar::test::small_config(60, 8));
    PipelineConfig cfg;
    cfg.k = 4;
    cfg.seed = 8;
    cfg.forest = {.n_trees = 15, .seed = 8};
    result = run_pipeline(ds, cfg);
    const auto& model = result.cluster.fit.model;
    service = std::make_unique<ApiService>(model, to_json(result.train.classifier, model.fingerprint()), ds);
  }

  ApiResponse get(const std::string& path, std::multimap<std::string, std::string> params = {}) const {
    return service->handle("GET", path, params, "");
  }
  ApiResponse post(const std::string& path, const Json& body) const { return post(path, body.dump()); }
  ApiResponse post(const std::string& path, const std::string& body) const {
    return service->handle("POST", path, {}, body);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("health, clusters and groups") {
  const auto& f = fixture();
  auto h = f.get("/api/health");
  CHECK(h.status == 200);
  CHECK(Json::parse(h.body) == Json{{"status", "ok"}});

  auto c = Json::parse(f.get("/api/clusters").body);
  CHECK(c["k"] == 4);
  CHECK(c["clusters"].size() == 4);
  CHECK(c["fingerprint"] == to_hex(f.result.cluster.fit.model.fingerprint()));

  auto g = Json::parse(f.get("/api/groups", {{"limit", "5"}}).body);
  CHECK(g["groups"].size() == 5);
  CHECK(g["total"] == f.ds.groups.size());
  CHECK(f.get("/api/groups", {{"limit", "-2"}}).status == 400);
  CHECK(f.get("/api/groups", {{"limit", "7x"}}).status == 400);

  const auto id = f.ds.groups.front().key.id();
  auto one = f.get("/api/groups/" + id);
  REQUIRE(one.status == 200);
  auto body = Json::parse(one.body);
  CHECK(body["id"] == id);
  CHECK(body["features"].size() == f.result.train.classifier.schema().size());
  CHECK(f.get("/api/groups/nope").status == 404);
  CHECK(f.get("/api/elsewhere").status == 404);
}

TEST_CASE("predict matches the in-process classifier") {
  const auto& f = fixture();
  const auto& test = f.result.train.test;
  REQUIRE(test.size() > 0);
  for (std::size_t i = 0; i < std::min<std::size_t>(test.size(), 10); ++i) {
    auto r = f.post("/api/predict", Json{{"instance_id", test.rows[i].instance_id}});
    REQUIRE(r.status == 200);
    const auto& rec = f.result.eval.predictions[i];
    CHECK(rec.instance_id == test.rows[i].instance_id);
    CHECK(Json::parse(r.body)["cluster"] == rec.predicted);
  }

  // Features passed by name give the same answer as by instance.
  const auto& schema = f.result.train.classifier.schema();
  Json named = Json::object();
  for (std::size_t j = 0; j < schema.size(); ++j) named[schema.name(j)] = test.features(0, static_cast<Eigen::Index>(j));
  auto by_name = Json::parse(f.post("/api/predict", Json{{"features", named}}).body);
  auto by_id = Json::parse(f.post("/api/predict", Json{{"instance_id", test.rows[0].instance_id}}).body);
  CHECK(by_name["probabilities"] == by_id["probabilities"]);
}

TEST_CASE("error statuses") {
  const auto& f = fixture();
  CHECK(f.post("/api/predict", std::string("{oops")).status == 400);
  CHECK(f.post("/api/predict", std::string("[1, 2]")).status == 400);
  CHECK(f.post("/api/predict", Json::object()).status == 400);
  CHECK(f.post("/api/predict", Json{{"group_key", "missing"}}).status == 404);
  CHECK(f.post("/api/predict", Json{{"features", Json::array({1.0})}}).status == 400);
  CHECK(f.post("/api/predict", Json{{"features", {{"not_a_feature", 1.0}}}}).status == 400);
  CHECK(f.post("/api/predict", Json{{"shape_model_fingerprint", "00000000deadbeef"},
                                    {"group_key", f.ds.groups.front().key.id()}})
            .status == 409);
  CHECK(f.post("/api/whatif", Json{{"group_key", f.ds.groups.front().key.id()}, {"scenario", "warp"}}).status ==
        400);

  // A classifier bound to another shape model is refused at construction.
  const auto& model = f.result.cluster.fit.model;
  CHECK_THROWS_AS(ApiService(model, to_json(f.result.train.classifier, model.fingerprint() + 1), f.ds), rvar::Error);
}

TEST_CASE("whatif") {
  const auto& f = fixture();
  const auto id = f.ds.groups.front().key.id();
  auto empty = f.post("/api/whatif", Json{{"group_key", id}, {"intervention", {{"name", "none"}, {"ops", Json::array()}}}});
  REQUIRE(empty.status == 200);
  auto e = Json::parse(empty.body);
  CHECK(e["before"] == e["after"]);
  CHECK(e["changed"] == false);

  auto scenario = f.post("/api/whatif", Json{{"group_key", id}, {"scenario", "spare-tokens-off"}});
  REQUIRE(scenario.status == 200);
  auto s = Json::parse(scenario.body);
  CHECK(s["intervention"]["name"] == "spare-tokens-off");
  CHECK(s["report"]["transition"].is_array());
}

TEST_CASE("http bridge") {
  const auto& f = fixture();
  const int port = 20000 + static_cast<int>(::getpid() % 30000);
  std::thread([&f, port] { serve_http(*f.service, "127.0.0.1", port); }).detach();

  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(1);
  httplib::Result res;
  for (int attempt = 0; attempt < 50 && !res; ++attempt) {
    res = client.Get("/api/health");
    if (!res) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(Json::parse(res->body)["status"] == "ok");

  auto post = client.Post("/api/predict", Json{{"group_key", f.ds.groups.front().key.id()}}.dump(), "application/json");
  REQUIRE(post);
  CHECK(post->status == 200);
  CHECK(Json::parse(post->body).contains("probabilities"));
}

}  // TEST_SUITE
