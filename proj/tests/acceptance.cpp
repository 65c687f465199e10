// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rvar/clustering.hpp"
#include "rvar/error.hpp"
#include "rvar/features.hpp"
#include "rvar/pipeline.hpp"
#include "rvar/serialize.hpp"
#include "rvar/shapley.hpp"
#include "rvar/synth.hpp"
#include "rvar/whatif.hpp"
#include "random_trees.hpp"

using namespace rvar;

namespace {

// Tolerances and budgets.
constexpr double kScoreTol = 1e-9;
constexpr double kMassTol = 1e-9;
constexpr double kTraceSlack = 1e-9;
constexpr double kMinAri = 0.9;
constexpr double kMinCeiling = 0.95;
constexpr double kChance = 0.25;
constexpr double kChanceBand = 0.10;
constexpr int kMinKsWins = 4;
constexpr double kAxiomTol = 1e-9;
constexpr double kSampledTol = 0.02;
constexpr double kBudget1 = 1.0;
constexpr double kBudget4 = 10.0;
constexpr double kBudget5 = 60.0;
constexpr double kBudget7 = 60.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void run(int id, const char* title, const std::function<void(Outcome&)>& body) {
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d %s:%s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.str().c_str());
  std::fflush(stdout);
}

Eigen::VectorXd random_pmf(std::mt19937_64& rng, Eigen::Index h, double sparsity) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd p(h);
  for (auto& x : p) x = u(rng) < sparsity ? 0.0 : u(rng);
  if (p.sum() == 0.0) p[0] = 1.0;
  return p / p.sum();
}

ShapeModel model_from_centroids(const BinningSpec& spec, const Eigen::MatrixXd& c) {
  ShapeModel m;
  m.spec = spec;
  m.k = static_cast<std::size_t>(c.rows());
  m.centroids = c;
  m.log_centroids = floored_log(c);
  m.stats.resize(m.k);
  for (std::size_t i = 0; i < m.k; ++i) m.cluster_order.push_back(i);
  return m;
}

void likelihood_oracle(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  const auto spec = BinningSpec::ratio();
  std::uniform_real_distribution<double> u(0.0, 12.0);
  std::uniform_int_distribution<int> n_obs(1, 200);
  int argmax_mismatch = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd c(8, 201);
    for (Eigen::Index i = 0; i < 8; ++i) c.row(i) = random_pmf(rng, 201, 0.5).transpose();
    const auto m = model_from_centroids(spec, c);
    std::vector<double> obs(static_cast<std::size_t>(n_obs(rng)));
    for (auto& x : obs) x = u(rng);
    const auto label = assign_membership(histogram(obs, spec), m);

    // Brute force over individual observations.
    Eigen::VectorXd brute = Eigen::VectorXd::Zero(8);
    for (double x : obs) brute += m.log_centroids.col(static_cast<Eigen::Index>(spec.bin_of(x)));
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < 8; ++i)
      if (brute[i] > brute[best]) best = i;
    argmax_mismatch += label.cluster_id != static_cast<std::size_t>(best);

    // Same ranking up to a positive scale and a shift: compare after scaling by n and centring.
    Eigen::VectorXd a = label.log_likelihoods * static_cast<double>(obs.size());
    a.array() -= a.mean();
    Eigen::VectorXd b = brute;
    b.array() -= b.mean();
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff()));
  }
  const double t = seconds_since(t0);
  o.detail << " argmax mismatches " << argmax_mismatch << "/100, max relative score gap " << worst << ", " << t
           << " s";
  o.require(argmax_mismatch == 0, "argmax");
  o.require(worst <= kScoreTol, "scores");
  o.require(t < kBudget1, "runtime");
}

void self_assignment(Outcome& o) {
  std::mt19937_64 rng(2);
  const auto spec = BinningSpec::ratio();
  int wrong = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng() % 9);
    Eigen::MatrixXd c(k, 201);
    for (Eigen::Index i = 0; i < k; ++i) c.row(i) = random_pmf(rng, 201, 0.7).transpose();
    const auto m = model_from_centroids(spec, c);
    const auto j = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(k));
    GroupPmf pmf;
    pmf.spec = spec;
    pmf.probs = m.log_centroids.row(j).array().exp().transpose();
    pmf.n_samples = 1;
    wrong += assign_membership(pmf, m).cluster_id != static_cast<std::size_t>(j);
  }
  o.detail << " " << wrong << "/1000 misassigned";
  o.require(wrong == 0, "self-assignment");
}

void pmf_conservation(Outcome& o) {
  std::mt19937_64 rng(3);
  for (const auto spec : {BinningSpec::ratio(), BinningSpec::delta()}) {
    const double span = spec.hi - spec.lo;
    std::uniform_real_distribution<double> inside(spec.lo, spec.hi);
    std::uniform_real_distribution<double> wide(spec.lo - 0.3 * span, spec.hi + 0.5 * span);
    std::uniform_int_distribution<int> size(1, 300);
    double worst_mass = 0.0;
    int negatives = 0, outlier_mismatch = 0;
    for (int trial = 0; trial < 10000; ++trial) {
      std::vector<double> v(static_cast<std::size_t>(size(rng)));
      const bool clumped = trial % 3 == 0;
      const double centre = inside(rng);
      for (auto& x : v) x = clumped ? centre : (trial % 3 == 1 ? inside(rng) : wide(rng));
      if (spec.mode == NormalizationMode::kRatio)
        for (auto& x : v) x = std::max(0.0, x);
      // Exact threshold values land in the outlier bin.
      if (trial % 7 == 0) v.front() = spec.hi;

      const auto h = histogram(v, spec);
      const auto s = smooth(h);
      std::size_t up = 0, down = 0;
      for (double x : v) {
        up += spec.is_upper_outlier(x);
        down += x < spec.lo;
      }
      const double n = static_cast<double>(v.size());
      for (const auto* p : {&h, &s}) {
        worst_mass = std::max(worst_mass, std::abs(p->probs.sum() - 1.0));
        negatives += (p->probs.array() < 0.0).count();
        outlier_mismatch += p->probs[static_cast<Eigen::Index>(spec.upper_outlier())] != static_cast<double>(up) / n;
        if (spec.has_lower_outlier()) outlier_mismatch += p->probs[0] != static_cast<double>(down) / n;
      }
    }
    o.detail << " " << to_string(spec.mode) << ": max |mass-1| " << worst_mass << ", negatives " << negatives
             << ", outlier mismatches " << outlier_mismatch << ";";
    o.require(worst_mass <= kMassTol, "mass");
    o.require(negatives == 0, "non-negative");
    o.require(outlier_mismatch == 0, "outlier mass");
  }
}

void kmeans_correctness(Outcome& o) {
  const auto t0 = Clock::now();
  auto c = synth_preset("separable", 42);
  c.n_groups = 200;
  const auto ds = generate_workload(c);
  PipelineConfig cfg;
  cfg.k = c.k_true();
  cfg.seed = 42;
  const auto windows = pipeline_windows(ds, cfg.fit_end, cfg.train_end);
  const auto step = cluster_step(ds, cfg, windows.fit);

  std::size_t violations = 0, traces = 0;
  auto check_traces = [&](const std::vector<std::vector<double>>& ts) {
    for (const auto& tr : ts) {
      ++traces;
      for (std::size_t i = 1; i < tr.size(); ++i) violations += tr[i] > tr[i - 1] + kTraceSlack;
    }
  };
  check_traces(step.fit.traces);
  // Extra fits on random point clouds.
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd pts(60, 12);
    for (Eigen::Index i = 0; i < 60; ++i) pts.row(i) = random_pmf(rng, 12, 0.3).transpose();
    check_traces(kmeans(pts, {.k = 2 + static_cast<std::size_t>(trial % 6), .seed = static_cast<std::uint64_t>(trial)})
                     .traces);
  }

  std::vector<std::size_t> truth, found;
  for (std::size_t i = 0; i < step.input.samples.size(); ++i) {
    if (!step.input.true_clusters[i]) continue;
    truth.push_back(static_cast<std::size_t>(*step.input.true_clusters[i]));
    found.push_back(step.fit.assignments[i]);
  }
  const double ari = adjusted_rand_index(truth, found);
  const double t = seconds_since(t0);
  o.detail << " " << traces << " traces, " << violations << " increases; ARI " << ari << " over " << truth.size()
           << " groups; " << t << " s";
  o.require(violations == 0, "monotone inertia");
  o.require(ari >= kMinAri, "ARI");
  o.require(t < kBudget4, "runtime");
}

void classifier_ceiling(Outcome& o) {
  const auto t0 = Clock::now();
  auto c = synth_preset("separable", 42);
  c.n_groups = 2000;
  const auto ds = generate_workload(c);
  PipelineConfig cfg;
  cfg.k = c.k_true();
  cfg.seed = 42;
  const auto windows = pipeline_windows(ds, cfg.fit_end, cfg.train_end);
  const auto step = cluster_step(ds, cfg, windows.fit);
  const auto schema = FeatureSchema::for_dataset(ds);
  auto [train, test] = split_by_time(ds, step.fit.model, schema, windows.train, windows.test, cfg.label_support);
  auto params = cfg.forest;
  params.seed = cfg.seed;

  auto accuracy = [&](const TreeEnsembleClassifier& clf) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < test.size(); ++i)
      ok += clf.predict(test.features.row(static_cast<Eigen::Index>(i)).transpose()) == test.labels[i];
    return static_cast<double>(ok) / static_cast<double>(test.size());
  };
  const double acc = accuracy(train_classifier(train, cfg.k, params));

  auto shuffled = train;
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x5eed));
  std::shuffle(shuffled.labels.begin(), shuffled.labels.end(), rng);
  const double chance = accuracy(train_classifier(shuffled, cfg.k, params));
  const double t = seconds_since(t0);
  o.detail << " accuracy " << acc << " on " << test.size() << " test rows, shuffled " << chance << ", " << t << " s";
  o.require(acc >= kMinCeiling, "ceiling");
  o.require(std::abs(chance - kChance) <= kChanceBand, "chance");
  o.require(t < kBudget5, "runtime");
}

void distribution_superiority(Outcome& o) {
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto c = synth_preset("heavy_tailed_bimodal", seed);
    PipelineConfig cfg;
    cfg.k = c.k_true();
    cfg.seed = seed;
    const auto r = run_pipeline(generate_workload(c), cfg);
    const bool win = r.eval.classification.ks < r.eval.regression.ks;
    wins += win;
    o.detail << " seed " << seed << ": " << r.eval.classification.ks << " vs " << r.eval.regression.ks << ";";
  }
  o.detail << " wins " << wins << "/5";
  o.require(wins >= kMinKsWins, "KS wins");
}

void shapley_axioms(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  double eff = 0.0, sym = 0.0, null = 0.0, sampled = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 3 + static_cast<std::size_t>(trial % 6);
    const auto di = static_cast<Eigen::Index>(d);
    std::vector<int> used;
    for (std::size_t i = 0; i + 1 < d; ++i) used.push_back(static_cast<int>(i));
    // A tree and its 0<->1 mirror make features 0 and 1 symmetric; the last feature is never split on.
    std::vector<DecisionTree> trees;
    for (int t = 0; t < 2; ++t) {
      auto tree = rvar::test::random_tree(rng, used, 4, 3);
      trees.push_back(rvar::test::swap_features(tree, 0, 1));
      trees.push_back(std::move(tree));
    }
    TreeEnsembleClassifier model(rvar::test::numbered_schema(d), 3, {}, trees);

    Eigen::MatrixXd base(6, di);
    for (auto& v : base.reshaped()) v = u(rng);
    Eigen::MatrixXd bg(12, di);
    bg << base, base;
    bg.col(0).tail(6) = base.col(1);
    bg.col(1).tail(6) = base.col(0);

    FeatureVector fv;
    fv.values.resize(di);
    for (auto& v : fv.values) v = u(rng);
    fv.values[1] = fv.values[0];
    const auto target = static_cast<std::size_t>(rng() % 3);

    const auto exact = exact_shapley(model, fv, target, bg);
    eff = std::max(eff, std::abs(exact.efficiency_gap()));
    null = std::max(null, std::abs(exact.values[di - 1]));
    sym = std::max(sym, std::abs(exact.values[0] - exact.values[1]));
    const auto s = shapley_sampled(model, fv, target, bg, 2000, static_cast<std::uint64_t>(trial));
    sampled = std::max(sampled, (s.values - exact.values).cwiseAbs().maxCoeff());
  }
  const double t = seconds_since(t0);
  o.detail << " efficiency " << eff << ", null " << null << ", symmetry " << sym << ", sampled vs exact " << sampled
           << ", " << t << " s";
  o.require(eff <= kAxiomTol, "efficiency");
  o.require(null == 0.0, "null player");
  o.require(sym <= kAxiomTol, "symmetry");
  o.require(sampled <= kSampledTol, "sampled");
  o.require(t < kBudget7, "runtime");
}

void whatif_invariants(Outcome& o) {
  const auto c = synth_preset("planted_mechanism", 42);
  PipelineConfig cfg;
  cfg.k = c.k_true();
  cfg.seed = 42;
  const auto r = run_pipeline(generate_workload(c), cfg);
  const auto& clf = r.train.classifier;
  const auto& model = r.cluster.fit.model;
  const auto& x = r.train.test.features;

  const auto id = run_scenario(x, clf, model, {"identity", {}});
  const bool diagonal = Eigen::MatrixXi(id.transition.diagonal().asDiagonal()) == id.transition;
  o.require(diagonal && id.pct_changed == 0.0, "identity");

  // Never-split features of the trained forest, plus a random ensemble with a planted unused column.
  const auto used = clf.used_features();
  std::size_t unused_checked = 0, unused_changed = 0;
  for (std::size_t j = 0; j < used.size(); ++j) {
    if (used[j]) continue;
    const auto rep = run_scenario(x, clf, model, {"null", {SetFeature{clf.schema().name(j), 1e6}}});
    ++unused_checked;
    unused_changed += static_cast<std::size_t>(std::lround(rep.pct_changed * static_cast<double>(rep.n_jobs)));
  }
  std::mt19937_64 rng(8);
  TreeEnsembleClassifier toy(rvar::test::numbered_schema(4), model.k, {},
                             {rvar::test::random_tree(rng, {0, 1, 2}, 5, model.k),
                              rvar::test::random_tree(rng, {0, 1, 2}, 5, model.k)});
  Eigen::MatrixXd pts(500, 4);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (auto& v : pts.reshaped()) v = u(rng);
  const auto toy_rep = run_scenario(pts, toy, model, {"null", {SetFeature{"ops[f3]", 42.0}}});
  ++unused_checked;
  unused_changed += static_cast<std::size_t>(std::lround(toy_rep.pct_changed * 500.0));
  o.require(unused_changed == 0, "never-split feature");

  const auto spare = run_scenario(x, clf, model, builtin_scenario("spare-tokens-off", clf.schema().skus()));
  o.detail << " identity diagonal " << (diagonal ? "yes" : "no") << "; " << unused_checked
           << " never-split features, " << unused_changed << " changed; spare-tokens-off on " << spare.n_jobs
           << " jobs: moved lower " << spare.moved_lower << ", higher " << spare.moved_higher;
  o.require(spare.moved_lower > 0, "spare-tokens-off direction");
}

void determinism(Outcome& o) {
  auto once = [] {
    auto c = synth_preset("separable", 9);
    c.n_groups = 150;
    const auto ds = generate_workload(c);
    PipelineConfig cfg;
    cfg.k = c.k_true();
    cfg.seed = 9;
    cfg.forest.n_trees = 20;
    const auto r = run_pipeline(ds, cfg);
    const auto fp = r.cluster.fit.model.fingerprint();
    std::string out;
    for (const auto& g : ds.groups)
      for (const auto& j : g.instances) out += to_json(j).dump() + "\n";
    out += to_json(r.cluster.fit.model).dump(2);
    out += to_json(r.train.classifier, fp).dump(2);
    out += to_json(r.train.regression, fp).dump(2);
    out += to_json(r.eval).dump(2);
    return out;
  };
  const auto a = once();
  const auto b = once();
  o.detail << " " << a.size() << " bytes of dataset, model and report JSON, " << (a == b ? "identical" : "different");
  o.require(a == b, "byte-identical");
}

void temporal_leakage(Outcome& o) {
  auto c = synth_preset("separable", 10);
  c.n_groups = 12;
  const auto ds = generate_workload(c);
  const auto schema = FeatureSchema::for_dataset(ds);
  const auto clean = audit_temporal_leakage(ds, schema);

  // Lookahead: the last instance's runtime leaks into every history mean.
  FeatureExtractor peeking = [](const JobGroup& g, const JobInstance& j, const FeatureSchema& s) {
    auto fv = extract_features(g, j, s);
    fv.values[static_cast<Eigen::Index>(s.require("runtime_hist_mean"))] += 1e-3 * g.instances.back().runtime;
    return fv;
  };
  const auto flagged = audit_temporal_leakage(ds, schema, peeking);
  o.detail << " " << ds.instance_count() << " instances: " << clean.size() << " violations; lookahead fixture "
           << flagged.size() << " violations";
  o.require(clean.empty(), "extractor clean");
  o.require(!flagged.empty(), "lookahead flagged");
}

}  // namespace

int main() {
  run(1, "likelihood oracle equivalence", likelihood_oracle);
  run(2, "self-assignment", self_assignment);
  run(3, "PMF conservation", pmf_conservation);
  run(4, "k-means correctness", kmeans_correctness);
  run(5, "classifier ceiling", classifier_ceiling);
  run(6, "distribution-prediction superiority", distribution_superiority);
  run(7, "Shapley axioms", shapley_axioms);
  run(8, "what-if invariants", whatif_invariants);
  run(9, "determinism", determinism);
  run(10, "no temporal leakage", temporal_leakage);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
