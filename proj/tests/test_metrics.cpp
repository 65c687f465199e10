#include <doctest.h>

#include <cmath>
#include <random>

#include "rvar/error.hpp"
#include "rvar/metrics.hpp"
#include "support.hpp"

using namespace rvar;

TEST_SUITE("metrics") {

TEST_CASE("scalar_summary hand examples") {
  std::vector<double> flat = {10, 10, 10, 10};
  auto s = scalar_summary(flat);
  CHECK(s.cov == 0.0);
  CHECK(s.median == 10.0);
  CHECK(s.p95 == 10.0);

  std::vector<double> two = {1, 3};
  s = scalar_summary(two);
  CHECK(s.mean == 2.0);
  CHECK(s.cov == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.median == 1.0);

  std::vector<double> one = {5};
  CHECK_THROWS_AS(scalar_summary(one), Error);
  std::vector<double> neg = {1, -1};
  CHECK_THROWS_AS(scalar_summary(neg), Error);
}

TEST_CASE("cov matches a two-pass oracle and is scale invariant") {
  std::mt19937_64 rng(1);
  std::lognormal_distribution<double> ln(3.0, 0.8);
  std::vector<double> x(1000);
  for (auto& v : x) v = ln(rng);

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= x.size();
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double oracle = std::sqrt(ss / x.size()) / mean;
  CHECK(std::abs(coefficient_of_variation(x) - oracle) <= 1e-12);

  for (double c : {1e-3, 7.0, 1e6}) {
    std::vector<double> y = x;
    for (auto& v : y) v *= c;
    CHECK(std::abs(coefficient_of_variation(y) - coefficient_of_variation(x)) <= 1e-12);
  }
}

TEST_CASE("outlier_rate follows the binning threshold") {
  std::vector<double> x = {1, 1, 1, 100};
  CHECK(scalar_summary(x, BinningSpec::ratio()).outlier_rate == doctest::Approx(0.25));
}

TEST_CASE("median pairs: constant group sits on the diagonal") {
  auto g = rvar::test::make_group({50, 50, 50, 50, 50, 50}, 0, 10);
  auto pairs = historic_vs_future_pairs(g, 30, PairMetric::kMedian);
  CHECK(pairs.size() == 3);
  for (const auto& p : pairs) CHECK(p.historic == p.future);
}

TEST_CASE("median pairs: a late 10x outlier is a stalagmite point") {
  auto g = rvar::test::make_group({50, 50, 50, 50, 500, 50}, 0, 10);
  auto pairs = historic_vs_future_pairs(g, 30, PairMetric::kMedian);
  REQUIRE(pairs.size() == 3);
  int above = 0;
  for (const auto& p : pairs) above += p.future > 5 * p.historic ? 1 : 0;
  CHECK(above == 1);
}

TEST_CASE("pairs match a hand-rolled loop and never see the future on the historic side") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(10, 100);
  std::vector<double> rt(30);
  for (auto& r : rt) r = u(rng);
  auto g = rvar::test::make_group(rt, 0, 10);
  const Timestamp split = 155;

  auto pairs = historic_vs_future_pairs(g, split, PairMetric::kMedian);
  std::size_t k = 0;
  for (const auto& j : g.instances) {
    if (j.submit_time < split) continue;
    std::vector<double> past;
    for (const auto& p : g.instances)
      if (p.submit_time < split) past.push_back(p.runtime);
    std::sort(past.begin(), past.end());
    REQUIRE(k < pairs.size());
    CHECK(pairs[k].historic == past[(past.size() - 1) / 2]);
    CHECK(pairs[k].future == j.runtime);
    ++k;
  }
  CHECK(k == pairs.size());

  std::vector<double> past, future;
  for (const auto& j : g.instances) (j.submit_time < split ? past : future).push_back(j.runtime);
  auto cov = historic_vs_future_pairs(g, split, PairMetric::kCov);
  REQUIRE(cov.size() == 1);
  CHECK(cov[0].historic == doctest::Approx(coefficient_of_variation(past)).epsilon(1e-12));
  CHECK(cov[0].future == doctest::Approx(coefficient_of_variation(future)).epsilon(1e-12));
  auto p95 = historic_vs_future_pairs(g, split, PairMetric::kP95);
  CHECK(p95[0].historic == doctest::Approx(quantile(past, 0.95)).epsilon(1e-12));

  // Changing future runtimes leaves every historic value alone.
  auto altered = g;
  for (auto& j : altered.instances)
    if (j.submit_time >= split) j.runtime *= 9;
  auto alt = historic_vs_future_pairs(altered, split, PairMetric::kMedian);
  for (std::size_t i = 0; i < alt.size(); ++i) CHECK(alt[i].historic == pairs[i].historic);

  CHECK_THROWS_AS(historic_vs_future_pairs(g, 0, PairMetric::kMedian), Error);
  CHECK_THROWS_AS(historic_vs_future_pairs(g, 10000, PairMetric::kMedian), Error);
}

TEST_CASE("csv export") {
  std::vector<MetricPair> pairs = {{1.5, 2.0}, {3.0, 4.25}};
  CHECK(pairs_to_csv(pairs) == "historic,future\n1.5,2\n3,4.25\n");
  CHECK(parse_pair_metric("cov") == PairMetric::kCov);
  CHECK_THROWS_AS(parse_pair_metric("mode"), Error);
}

}  // TEST_SUITE
