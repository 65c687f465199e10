#include "rvar/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "rvar/error.hpp"

namespace rvar {

namespace {

void check_background(const Eigen::VectorXd& x, const Eigen::MatrixXd& background) {
  if (background.rows() == 0) throw Error(ErrorCode::kInvalidArgument, "background set is empty");
  if (background.cols() != x.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "background width " + std::to_string(background.cols()) +
                                                " differs from the instance width " + std::to_string(x.size()));
  }
}

ModelFn class_probability(const TreeEnsembleClassifier& model, std::size_t target_class) {
  if (target_class >= model.n_classes()) {
    throw Error(ErrorCode::kInvalidArgument, "target class " + std::to_string(target_class) + " out of range");
  }
  return [&model, target_class](const Eigen::Ref<const Eigen::VectorXd>& v) {
    return model.predict_proba(v)[static_cast<Eigen::Index>(target_class)];
  };
}

void check_model_width(const TreeEnsembleClassifier& model, const FeatureVector& fv) {
  if (static_cast<std::size_t>(fv.values.size()) != model.schema().size()) {
    throw Error(ErrorCode::kSchemaMismatch, "feature vector has " + std::to_string(fv.values.size()) +
                                                " values, model expects " + std::to_string(model.schema().size()));
  }
}

void attach(ShapleyReport& r, const TreeEnsembleClassifier& model, const FeatureVector& fv, std::size_t target) {
  r.instance_id = fv.instance_id;
  r.target_class = target;
  r.feature_names = model.schema().names();
}

}  // namespace

ShapleyReport shapley_sampled(const ModelFn& f, const Eigen::VectorXd& x, const Eigen::MatrixXd& background,
                              std::size_t n_permutations, std::uint64_t seed) {
  if (n_permutations == 0) throw Error(ErrorCode::kInvalidArgument, "n_permutations must be >= 1");
  check_background(x, background);
  const auto d = x.size();
  const auto n_ref = background.rows();

  ShapleyReport r;
  r.feature_values = x;
  r.values = Eigen::VectorXd::Zero(d);
  r.n_permutations = n_permutations;
  r.fx = f(x);
  for (Eigen::Index b = 0; b < n_ref; ++b) r.baseline += f(background.row(b).transpose());
  r.baseline /= static_cast<double>(n_ref);

  std::mt19937_64 rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Eigen::VectorXd z(d);
  for (std::size_t p = 0; p < n_permutations; ++p) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index b = 0; b < n_ref; ++b) {
      z = background.row(b).transpose();
      double prev = f(z);
      for (const auto j : order) {
        if (z[j] == x[j]) continue;  // inserting an equal value changes nothing
        z[j] = x[j];
        const double cur = f(z);
        r.values[j] += cur - prev;
        prev = cur;
      }
    }
  }
  r.values /= static_cast<double>(n_permutations) * static_cast<double>(n_ref);
  return r;
}

ShapleyReport exact_shapley(const ModelFn& f, const Eigen::VectorXd& x, const Eigen::MatrixXd& background) {
  check_background(x, background);
  const auto d = static_cast<std::size_t>(x.size());
  if (d > kMaxExactFeatures) {
    throw Error(ErrorCode::kTooManyFeatures,
                std::to_string(d) + " features exceed the exact limit of " + std::to_string(kMaxExactFeatures));
  }
  const std::size_t n_sets = std::size_t{1} << d;
  const auto n_ref = background.rows();

  // v(S): mean output with features in S taken from x, the rest from a reference.
  std::vector<double> v(n_sets, 0.0);
  Eigen::VectorXd z(x.size());
  for (std::size_t mask = 0; mask < n_sets; ++mask) {
    double sum = 0.0;
    for (Eigen::Index b = 0; b < n_ref; ++b) {
      z = background.row(b).transpose();
      for (std::size_t j = 0; j < d; ++j) {
        if (mask >> j & 1U) z[static_cast<Eigen::Index>(j)] = x[static_cast<Eigen::Index>(j)];
      }
      sum += f(z);
    }
    v[mask] = sum / static_cast<double>(n_ref);
  }

  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::vector<double> weight(d, 0.0);  // by coalition size
  for (std::size_t s = 0; s < d; ++s) weight[s] = fact[s] * fact[d - s - 1] / fact[d];

  ShapleyReport r;
  r.feature_values = x;
  r.values = Eigen::VectorXd::Zero(x.size());
  r.fx = v[n_sets - 1];
  r.baseline = v[0];
  for (std::size_t j = 0; j < d; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < n_sets; ++mask) {
      if (mask & bit) continue;
      const auto s = static_cast<std::size_t>(std::popcount(mask));
      phi += weight[s] * (v[mask | bit] - v[mask]);
    }
    r.values[static_cast<Eigen::Index>(j)] = phi;
  }
  return r;
}

ShapleyReport shapley_sampled(const TreeEnsembleClassifier& model, const FeatureVector& fv, std::size_t target_class,
                              const Eigen::MatrixXd& background, std::size_t n_permutations, std::uint64_t seed) {
  check_model_width(model, fv);
  auto r = shapley_sampled(class_probability(model, target_class), fv.values, background, n_permutations, seed);
  attach(r, model, fv, target_class);
  return r;
}

ShapleyReport exact_shapley(const TreeEnsembleClassifier& model, const FeatureVector& fv, std::size_t target_class,
                            const Eigen::MatrixXd& background) {
  check_model_width(model, fv);
  auto r = exact_shapley(class_probability(model, target_class), fv.values, background);
  attach(r, model, fv, target_class);
  return r;
}

Eigen::MatrixXd sample_background(const Eigen::MatrixXd& rows, std::size_t n, std::uint64_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(rows.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  const std::size_t take = std::min(n, idx.size());
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(take), rows.cols());
  for (std::size_t i = 0; i < take; ++i) out.row(static_cast<Eigen::Index>(i)) = rows.row(idx[i]);
  return out;
}

std::vector<std::pair<double, double>> shap_summary(const TreeEnsembleClassifier& model,
                                                    const Eigen::MatrixXd& instances, std::string_view feature,
                                                    std::size_t target_class, const Eigen::MatrixXd& background,
                                                    std::size_t n_permutations, std::uint64_t seed) {
  const auto j = static_cast<Eigen::Index>(model.schema().require(feature));
  std::vector<std::pair<double, double>> out;
  for (Eigen::Index i = 0; i < instances.rows(); ++i) {
    FeatureVector fv;
    fv.values = instances.row(i).transpose();
    const auto r = shapley_sampled(model, fv, target_class, background, n_permutations, seed);
    out.emplace_back(fv.values[j], r.values[j]);
  }
  return out;
}

std::string shapley_to_csv(const std::vector<ShapleyReport>& reports) {
  std::ostringstream out;
  out.precision(17);
  out << "instance_id,feature,feature_value,shapley_value,class\n";
  for (const auto& r : reports) {
    for (Eigen::Index j = 0; j < r.values.size(); ++j) {
      out << r.instance_id << ',' << r.feature_names[static_cast<std::size_t>(j)] << ',' << r.feature_values[j]
          << ',' << r.values[j] << ',' << r.target_class << '\n';
    }
  }
  return out.str();
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j);
    for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw Error(ErrorCode::kInvalidArgument, "spearman needs paired samples");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  return pearson(Eigen::Map<const Eigen::VectorXd>(ra.data(), static_cast<Eigen::Index>(ra.size())),
                 Eigen::Map<const Eigen::VectorXd>(rb.data(), static_cast<Eigen::Index>(rb.size())));
}

}  // namespace rvar
