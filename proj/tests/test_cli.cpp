#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "rvar/cli.hpp"
#include "rvar/pipeline.hpp"
#include "rvar/serialize.hpp"
#include "rvar/synth.hpp"
#include "support.hpp"

using namespace rvar;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "rvar");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  REQUIRE(f.good());
  return {std::istreambuf_iterator<char>(f), {}};
}

// Points the project store at `dir` for the lifetime of the guard.
class StoreGuard {
 public:
  explicit StoreGuard(const std::filesystem::path& dir) { ::setenv("RVAR_STORE", dir.c_str(), 1); }
  ~StoreGuard() { ::unsetenv("RVAR_STORE"); }
};

void full_run(const std::filesystem::path& store) {
  StoreGuard guard(store);
  REQUIRE(cli({"synth", "--preset", "separable", "--groups", "60", "--seed", "3"}).code == kExitOk);
  REQUIRE(cli({"cluster", "--k", "4", "--seed", "3"}).code == kExitOk);
  REQUIRE(cli({"train", "--trees", "15", "--seed", "3"}).code == kExitOk);
  auto e = cli({"eval"});
  REQUIRE(e.code == kExitOk);
  CHECK(e.out.find("accuracy") != std::string::npos);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"cluster", "--no-such-flag"}).code == kExitUsage);
  CHECK(cli({"cluster", "--mode", "sideways"}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("data errors") {
  rvar::test::TempDir dir("cli_err");
  StoreGuard guard(dir.path());
  auto r = cli({"cluster", "--dataset", dir.str("absent.jsonl")});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("error:") == 0);
  std::ofstream(dir.str("bad.jsonl")) << "{\"job_id\": 1}\n";
  CHECK(cli({"ingest", "--dataset", dir.str("bad.jsonl")}).code == kExitData);
}

TEST_CASE("synth to eval is deterministic and matches the library pipeline") {
  rvar::test::TempDir a("cli_a"), b("cli_b");
  full_run(a.path());
  full_run(b.path());
  for (const auto* rel : {"models/shape_ratio.json", "models/classifier_ratio.json", "models/regression_ratio.json",
                          "reports/eval_ratio.json", "datasets/synthetic.jsonl"}) {
    CAPTURE(rel);
    CHECK(slurp(a.path() / rel) == slurp(b.path() / rel));
  }

  auto c = synth_preset("separable", 3);
  c.n_groups = 60;
  PipelineConfig cfg;
  cfg.k = 4;
  cfg.seed = 3;
  cfg.forest.n_trees = 15;
  const auto result = run_pipeline(generate_workload(c), cfg);
  const auto report = read_json_file((a.path() / "reports/eval_ratio.json").string());
  CHECK(report["accuracy"].get<double>() == result.eval.accuracy);
  CHECK(read_json_file((a.path() / "models/shape_ratio.json").string()) == to_json(result.cluster.fit.model));
}

TEST_CASE("downstream commands on a trained store") {
  rvar::test::TempDir dir("cli_down");
  full_run(dir.path());
  StoreGuard guard(dir.path());

  auto w = cli({"whatif", "--scenario", "spare-tokens-off"});
  CHECK(w.code == kExitOk);
  CHECK(std::filesystem::exists(dir.path() / "reports/whatif_spare-tokens-off.json"));

  auto x = cli({"explain", "--limit", "2", "--permutations", "8", "--background", "8"});
  CHECK(x.code == kExitOk);
  CHECK(std::filesystem::exists(dir.path() / "reports/explain_ratio.csv"));

  auto m = cli({"metrics", "--metric", "cov", "--out", dir.str("cov.csv")});
  CHECK(m.code == kExitOk);
  CHECK(slurp(dir.path() / "cov.csv").starts_with("historic,future\n"));

  CHECK(cli({"assign"}).code == kExitOk);
  CHECK(cli({"whatif", "--scenario", "no-such-scenario"}).code == kExitData);
}

}  // TEST_SUITE
