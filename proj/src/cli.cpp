#include "rvar/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "rvar/error.hpp"
#include "rvar/metrics.hpp"
#include "rvar/pipeline.hpp"
#include "rvar/serialize.hpp"
#include "rvar/service.hpp"
#include "rvar/shapley.hpp"
#include "rvar/synth.hpp"
#include "rvar/whatif.hpp"

namespace rvar {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string dataset = "synthetic";
  std::string mode = "ratio";
  std::size_t k = 8;
  std::uint64_t seed = 0;
  std::size_t support = 0;  // 0 = command default
  std::string out;
  std::string model;
  std::string classifier;
  std::string regression;
  std::string scenario;
  int port = 8080;
  std::string host = "127.0.0.1";

  std::string preset = "separable";
  std::string config;
  std::size_t groups = 0;
  std::string metric = "median";
  double split = 0.5;
  double fit_end = 0.5;
  double train_end = 0.8;
  std::size_t elbow = 0;
  std::size_t trees = 50;
  std::size_t max_depth = 0;
  std::size_t min_leaf = 1;
  bool sweep = false;
  double select = 0.0;
  bool shuffle_labels = false;
  std::string split_name = "test";
  std::size_t limit = 10;
  long target_class = -1;
  std::size_t background = kDefaultBackground;
  std::size_t permutations = kDefaultPermutations;
  std::string feature;
  std::string name;
};

class Cli {
 public:
  Cli(Options o, std::ostream& out) : o_(std::move(o)), out_(out), store_(ProjectStore::from_env()) {}

  void synth() {
    SynthConfig c = o_.config.empty() ? synth_preset(o_.preset, o_.seed) : synth_config_from_json(read_json_file(o_.config));
    if (seed_given_) c.seed = o_.seed;
    if (o_.groups) c.n_groups = o_.groups;
    const auto ds = generate_workload(c);
    const auto path = output_path(store_.dataset_path("synthetic"));
    write_dataset(path.string(), ds);
    out_ << "wrote " << ds.instance_count() << " instances in " << ds.groups.size() << " groups to " << path.string()
         << '\n';
  }

  void ingest() {
    const auto support = o_.support ? o_.support : 3;
    const auto ds = load_dataset(dataset_path().string(), DatasetRole::kClusterFit, support);
    const auto name = o_.name.empty() ? fs::path(o_.dataset).stem().string() : o_.name;
    const auto path = output_path(store_.dataset_path(name));
    write_dataset(path.string(), ds);
    out_ << "ingested " << ds.instance_count() << " instances in " << ds.groups.size() << " groups (support >= "
         << support << ") into " << path.string() << '\n';
  }

  void metrics() {
    const auto ds = load();
    const auto metric = parse_pair_metric(o_.metric);
    if (!(o_.split > 0.0 && o_.split < 1.0)) throw Error(ErrorCode::kInvalidArgument, "--split must be in (0, 1)");
    const auto [first, last] = time_span(ds);
    const Timestamp split_time =
        first + static_cast<Timestamp>(std::floor(o_.split * static_cast<double>(last - first + 1)));
    std::vector<MetricPair> pairs;
    std::size_t skipped = 0;
    for (const auto& g : ds.groups) {
      try {
        const auto p = historic_vs_future_pairs(g, split_time, metric);
        pairs.insert(pairs.end(), p.begin(), p.end());
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNoHistory && e.code() != ErrorCode::kNoFuture &&
            e.code() != ErrorCode::kInsufficientSamples) {
          throw;
        }
        ++skipped;
      }
    }
    const auto csv = pairs_to_csv(pairs);
    if (o_.out.empty()) {
      out_ << csv;
    } else {
      write_text(o_.out, csv);
      out_ << "wrote " << pairs.size() << " " << o_.metric << " pairs to " << o_.out << " (" << skipped
           << " groups skipped)\n";
    }
  }

  void cluster() {
    const auto ds = load();
    auto cfg = pipeline_config();
    const auto windows = pipeline_windows(ds, cfg.fit_end, cfg.train_end);
    if (o_.elbow) {
      const auto in = cluster_input(ds, BinningSpec::for_mode(cfg.mode), windows.fit, cfg.cluster_support);
      std::vector<GroupPmf> pmfs;
      for (const auto& s : in.samples) pmfs.push_back(s.smoothed);
      const auto curve = inertia_curve(pmfs, 2, o_.elbow, cfg.seed, cfg.n_init);
      for (const auto& [kk, inertia] : curve) out_ << "k=" << kk << " inertia=" << inertia << '\n';
      out_ << "elbow k=" << elbow_k(curve) << '\n';
      return;
    }
    const auto step = cluster_step(ds, cfg, windows.fit);
    const auto path = output_path(store_.shape_model_path(cfg.mode));
    write_json_file(path.string(), to_json(step.fit.model));
    out_ << "clustered " << step.input.samples.size() << " groups into k=" << cfg.k << " (inertia "
         << step.fit.inertia << ")\n"
         << format_cluster_report(step.fit.model) << "shape model written to " << path.string() << '\n';
  }

  void assign() {
    const auto ds = load();
    const auto model = load_shape();
    const auto [first, last] = time_span(ds);
    const TimeWindow all{first, last + 1};
    const auto support = o_.support ? o_.support : 3;
    Json rows = Json::array();
    std::vector<std::size_t> counts(model.k, 0);
    for (const auto& g : ds.groups) {
      auto pmf = window_pmf(g, all, model.spec, support);
      if (!pmf) continue;
      const auto label = assign_membership(*pmf, model);
      ++counts[label.cluster_id];
      rows.push_back({{"group_id", g.key.id()},
                      {"normalized_name", g.key.normalized_name},
                      {"cluster_id", label.cluster_id},
                      {"n_samples", label.n_samples}});
    }
    const auto path = output_path(store_.report_path("assign_" + std::string(to_string(model.spec.mode))));
    write_json_file(path.string(), Json{{"shape_model_fingerprint", to_hex(model.fingerprint())}, {"groups", rows}});
    out_ << "assigned " << rows.size() << " groups\n";
    for (std::size_t c = 0; c < model.k; ++c) out_ << "  cluster " << c << ": " << counts[c] << '\n';
    out_ << "memberships written to " << path.string() << '\n';
  }

  void train() {
    const auto ds = load();
    const auto model = load_shape();
    auto cfg = pipeline_config();
    cfg.mode = model.spec.mode;
    const auto windows = pipeline_windows(ds, cfg.fit_end, cfg.train_end);
    const auto step = train_step(ds, model, windows, cfg);
    const auto cpath = output_path(store_.classifier_path(model.spec.mode));
    const auto rpath = o_.regression.empty() ? store_.regression_path(model.spec.mode) : fs::path(o_.regression);
    ensure_parent(rpath);
    write_json_file(cpath.string(), to_json(step.classifier, model.fingerprint()));
    write_json_file(rpath.string(), to_json(step.regression, model.fingerprint()));
    out_ << "trained on " << step.train.size() << " rows with " << step.classifier.schema().size() << " features, "
         << step.params.n_trees << " trees (max_depth " << step.params.max_depth << ", min_leaf "
         << step.params.min_leaf << ")\n";
    if (step.sweep) {
      for (const auto& [p, acc] : step.sweep->scores) {
        out_ << "  sweep max_depth=" << p.max_depth << " min_leaf=" << p.min_leaf << " validation accuracy " << acc
             << '\n';
      }
    }
    out_ << "classifier written to " << cpath.string() << "\nregression baseline written to " << rpath.string()
         << '\n';
  }

  void eval() {
    const auto ds = load();
    const auto model = load_shape();
    const auto classifier = load_classifier(model);
    const auto rpath = o_.regression.empty() ? store_.regression_path(model.spec.mode) : fs::path(o_.regression);
    const auto regression = regression_from_json(read_json_file(rpath.string()), model.fingerprint());
    const auto test = split_rows(ds, model, classifier.schema(), "test");
    const auto report = evaluate(classifier, regression, model, test);
    const auto path = output_path(store_.report_path("eval_" + std::string(to_string(model.spec.mode))));
    write_json_file(path.string(), to_json(report));
    out_ << format_eval_report(report) << "report written to " << path.string() << '\n';
  }

  void explain() {
    const auto ds = load();
    const auto model = load_shape();
    const auto classifier = load_classifier(model);
    const auto train = split_rows(ds, model, classifier.schema(), "train");
    const auto rows = split_rows(ds, model, classifier.schema(), o_.split_name);
    if (rows.size() == 0) throw Error(ErrorCode::kEmptySplit, "no rows to explain");
    const auto background = sample_background(train.features, o_.background, o_.seed);
    std::vector<ShapleyReport> reports;
    Json out = Json::array();
    for (std::size_t i = 0; i < std::min(o_.limit, rows.size()); ++i) {
      FeatureVector fv;
      fv.values = rows.features.row(static_cast<Eigen::Index>(i)).transpose();
      fv.instance_id = rows.rows[i].instance_id;
      const auto target = o_.target_class >= 0 ? static_cast<std::size_t>(o_.target_class) : classifier.predict(fv.values);
      reports.push_back(shapley_sampled(classifier, fv, target, background, o_.permutations, o_.seed));
      out.push_back(to_json(reports.back()));
    }
    const auto path = output_path(store_.report_path("explain_" + std::string(to_string(model.spec.mode))));
    write_json_file(path.string(), out);
    auto csv_path = path;
    csv_path.replace_extension(".csv");
    write_text(csv_path.string(), shapley_to_csv(reports));
    for (const auto& r : reports) {
      std::vector<std::pair<double, std::size_t>> ranked;
      for (Eigen::Index j = 0; j < r.values.size(); ++j) ranked.emplace_back(-std::abs(r.values[j]), j);
      std::sort(ranked.begin(), ranked.end());
      out_ << r.instance_id << " class " << r.target_class << " p=" << r.fx << " baseline=" << r.baseline << '\n';
      for (std::size_t t = 0; t < std::min<std::size_t>(3, ranked.size()); ++t) {
        const auto j = ranked[t].second;
        out_ << "  " << r.feature_names[j] << " = " << r.feature_values[static_cast<Eigen::Index>(j)] << " -> "
             << r.values[static_cast<Eigen::Index>(j)] << '\n';
      }
    }
    if (!o_.feature.empty()) {
      const auto target = o_.target_class >= 0 ? static_cast<std::size_t>(o_.target_class) : 0;
      const auto n = std::min(o_.limit, rows.size());
      const Eigen::MatrixXd head = rows.features.topRows(static_cast<Eigen::Index>(n));
      const auto pairs = shap_summary(classifier, head, o_.feature, target, background, o_.permutations, o_.seed);
      auto summary_path = path;
      summary_path.replace_filename("shap_summary_" + std::string(to_string(model.spec.mode)) + ".csv");
      std::string csv = "feature_value,shapley_value\n";
      for (const auto& [v, s] : pairs) csv += format_double(v) + "," + format_double(s) + "\n";
      write_text(summary_path.string(), csv);
      out_ << "summary for " << o_.feature << " written to " << summary_path.string() << '\n';
    }
    out_ << "explanations written to " << path.string() << " and " << csv_path.string() << '\n';
  }

  void whatif() {
    if (o_.scenario.empty()) throw Error(ErrorCode::kInvalidArgument, "--scenario is required");
    const auto ds = load();
    const auto model = load_shape();
    const auto classifier = load_classifier(model);
    Intervention intervention = fs::is_regular_file(o_.scenario)
                                    ? intervention_from_json(read_json_file(o_.scenario))
                                    : builtin_scenario(o_.scenario, classifier.schema().skus());
    const auto rows = split_rows(ds, model, classifier.schema(), o_.split_name);
    const auto report = run_scenario(rows.features, classifier, model, intervention);
    const auto path = output_path(store_.report_path("whatif_" + intervention.name));
    write_json_file(path.string(), to_json(report));
    out_ << format_scenario_report(report) << "report written to " << path.string() << '\n';
  }

  void serve() {
    const auto ds = load();
    const auto model = load_shape();
    const auto cpath = o_.classifier.empty() ? store_.classifier_path(model.spec.mode) : fs::path(o_.classifier);
    ApiService service(model, read_json_file(cpath.string()), ds);
    out_ << "serving on http://" << o_.host << ':' << o_.port << "/api\n" << std::flush;
    if (!serve_http(service, o_.host, o_.port)) {
      throw Error(ErrorCode::kIo, "cannot listen on " + o_.host + ":" + std::to_string(o_.port));
    }
  }

  void mark_seed_given() { seed_given_ = true; }

 private:
  fs::path dataset_path() const {
    if (fs::exists(o_.dataset)) return o_.dataset;
    const auto stored = store_.dataset_path(o_.dataset);
    if (fs::exists(stored)) return stored;
    throw Error(ErrorCode::kIo, "no dataset '" + o_.dataset + "' (looked in . and " + store_.datasets().string() + ")");
  }

  Dataset load() const { return load_dataset(dataset_path().string(), DatasetRole::kClusterFit, 1); }

  ShapeModel load_shape() const {
    const auto path = o_.model.empty() ? store_.shape_model_path(parse_normalization_mode(o_.mode)) : fs::path(o_.model);
    return shape_model_from_json(read_json_file(path.string()));
  }

  TreeEnsembleClassifier load_classifier(const ShapeModel& model) const {
    const auto path = o_.classifier.empty() ? store_.classifier_path(model.spec.mode) : fs::path(o_.classifier);
    return classifier_from_json(read_json_file(path.string()), model.fingerprint());
  }

  LabeledSet split_rows(const Dataset& ds, const ShapeModel& model, const FeatureSchema& schema,
                        const std::string& which) const {
    const auto cfg = pipeline_config();
    const auto w = pipeline_windows(ds, cfg.fit_end, cfg.train_end);
    if (which != "train" && which != "test") throw Error(ErrorCode::kInvalidArgument, "--split must be train or test");
    return labeled_window(ds, model, schema, which == "train" ? w.train : w.test, cfg.label_support);
  }

  PipelineConfig pipeline_config() const {
    PipelineConfig c;
    c.mode = parse_normalization_mode(o_.mode);
    c.k = o_.k;
    c.seed = o_.seed;
    c.fit_end = o_.fit_end;
    c.train_end = o_.train_end;
    c.cluster_support = o_.support ? o_.support : 20;
    c.label_support = o_.support ? o_.support : 3;
    c.forest.n_trees = o_.trees;
    c.forest.max_depth = o_.max_depth;
    c.forest.min_leaf = o_.min_leaf;
    c.sweep = o_.sweep;
    c.select_threshold = o_.select;
    c.shuffle_labels = o_.shuffle_labels;
    return c;
  }

  fs::path output_path(const fs::path& fallback) const {
    const fs::path p = o_.out.empty() ? fallback : fs::path(o_.out);
    ensure_parent(p);
    return p;
  }

  static void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) {
      std::error_code ec;
      fs::create_directories(p.parent_path(), ec);
      if (ec) throw Error(ErrorCode::kIo, "cannot create '" + p.parent_path().string() + "'");
    }
  }

  static void write_text(const std::string& path, const std::string& text) {
    ensure_parent(path);
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
    f << text;
  }

  static std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  Options o_;
  std::ostream& out_;
  ProjectStore store_;
  bool seed_given_ = false;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Runtime-variation shapes for recurring jobs", args.empty() ? "rvar" : args[0]};
  app.require_subcommand(1);
  Options o;

  auto dataset = [&](CLI::App* s) { s->add_option("--dataset", o.dataset, "JSONL file or dataset name in the store"); };
  auto mode = [&](CLI::App* s) { s->add_option("--mode", o.mode, "ratio or delta")->check(CLI::IsMember({"ratio", "delta"})); };
  auto seed = [&](CLI::App* s) { return s->add_option("--seed", o.seed, "random seed"); };
  auto out_opt = [&](CLI::App* s) { s->add_option("--out", o.out, "output path"); };
  auto support = [&](CLI::App* s) { s->add_option("--support", o.support, "minimum instances per group"); };
  auto windows = [&](CLI::App* s) {
    s->add_option("--fit-end", o.fit_end, "end of the clustering window (fraction of span)");
    s->add_option("--train-end", o.train_end, "end of the training window (fraction of span)");
  };
  auto models = [&](CLI::App* s) {
    s->add_option("--model", o.model, "shape model JSON");
    s->add_option("--classifier", o.classifier, "classifier JSON");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic workload");
  synth->add_option("--preset", o.preset, "separable, heavy_tailed_bimodal or planted_mechanism");
  synth->add_option("--config", o.config, "SynthConfig JSON");
  synth->add_option("--groups", o.groups, "override the number of groups");
  auto* synth_seed = seed(synth);
  out_opt(synth);

  auto* ingest = app.add_subcommand("ingest", "load, group and filter a telemetry JSONL file");
  ingest->add_option("--dataset", o.dataset, "input JSONL")->required();
  ingest->add_option("--name", o.name, "dataset name in the store");
  support(ingest);
  out_opt(ingest);

  auto* metrics = app.add_subcommand("metrics", "historic vs future scalar metric pairs as CSV");
  dataset(metrics);
  metrics->add_option("--metric", o.metric, "median, cov or p95")->check(CLI::IsMember({"median", "cov", "p95"}));
  metrics->add_option("--split", o.split, "split point (fraction of span)");
  out_opt(metrics);

  auto* cluster = app.add_subcommand("cluster", "fit distribution shapes with k-means");
  dataset(cluster);
  mode(cluster);
  cluster->add_option("--k", o.k, "number of clusters")->check(CLI::PositiveNumber);
  seed(cluster);
  support(cluster);
  windows(cluster);
  cluster->add_option("--elbow", o.elbow, "print the inertia curve for k = 2..N instead of fitting");
  out_opt(cluster);

  auto* assign = app.add_subcommand("assign", "posterior membership of every group");
  dataset(assign);
  mode(assign);
  assign->add_option("--model", o.model, "shape model JSON");
  support(assign);
  out_opt(assign);

  auto* train = app.add_subcommand("train", "fit the shape classifier and the regression baseline");
  dataset(train);
  mode(train);
  train->add_option("--model", o.model, "shape model JSON");
  seed(train);
  support(train);
  windows(train);
  train->add_option("--trees", o.trees, "trees per forest")->check(CLI::PositiveNumber);
  train->add_option("--max-depth", o.max_depth, "0 = unlimited");
  train->add_option("--min-leaf", o.min_leaf, "minimum samples per leaf")->check(CLI::PositiveNumber);
  train->add_flag("--sweep", o.sweep, "grid-search depth and leaf size on a time-ordered validation split");
  train->add_option("--select", o.select, "drop features below this Gini importance");
  train->add_flag("--shuffle-labels", o.shuffle_labels, "permute training labels (chance control)");
  train->add_option("--regression", o.regression, "regression baseline output path");
  out_opt(train);

  auto* eval = app.add_subcommand("eval", "evaluate on the test window");
  dataset(eval);
  mode(eval);
  models(eval);
  eval->add_option("--regression", o.regression, "regression baseline JSON");
  support(eval);
  windows(eval);
  out_opt(eval);

  auto* explain = app.add_subcommand("explain", "Shapley attributions for test instances");
  dataset(explain);
  mode(explain);
  models(explain);
  seed(explain);
  support(explain);
  windows(explain);
  explain->add_option("--class", o.target_class, "target cluster (default: predicted)");
  explain->add_option("--limit", o.limit, "number of instances");
  explain->add_option("--background", o.background, "background rows")->check(CLI::PositiveNumber);
  explain->add_option("--permutations", o.permutations, "sampled permutations")->check(CLI::PositiveNumber);
  explain->add_option("--feature", o.feature, "also write a (value, shapley) summary for this feature");
  explain->add_option("--split", o.split_name, "train or test")->check(CLI::IsMember({"train", "test"}));
  out_opt(explain);

  auto* whatif = app.add_subcommand("whatif", "predicted cluster transitions under an intervention");
  dataset(whatif);
  mode(whatif);
  models(whatif);
  support(whatif);
  windows(whatif);
  whatif->add_option("--scenario", o.scenario, "spare-tokens-off, sku-upgrade, load-balance or a JSON file")->required();
  whatif->add_option("--split", o.split_name, "train or test")->check(CLI::IsMember({"train", "test"}));
  out_opt(whatif);

  auto* serve = app.add_subcommand("serve", "HTTP API for predictions and what-if");
  dataset(serve);
  mode(serve);
  models(serve);
  serve->add_option("--port", o.port, "TCP port")->check(CLI::Range(1, 65535));
  serve->add_option("--host", o.host, "bind address");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  if (args.empty()) argv.push_back("rvar");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    Cli cli(o, out);
    if (synth_seed->count()) cli.mark_seed_given();
    if (synth->parsed()) cli.synth();
    else if (ingest->parsed()) cli.ingest();
    else if (metrics->parsed()) cli.metrics();
    else if (cluster->parsed()) cli.cluster();
    else if (assign->parsed()) cli.assign();
    else if (train->parsed()) cli.train();
    else if (eval->parsed()) cli.eval();
    else if (explain->parsed()) cli.explain();
    else if (whatif->parsed()) cli.whatif();
    else if (serve->parsed()) cli.serve();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace rvar
