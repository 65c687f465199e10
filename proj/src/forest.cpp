#include "rvar/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rvar/clustering.hpp"
#include "rvar/error.hpp"

namespace rvar {

const Eigen::VectorXd& DecisionTree::leaf_value(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  std::size_t i = 0;
  while (nodes_[i].feature >= 0) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
  }
  return nodes_[i].value;
}

std::size_t DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes_[i].feature >= 0) {
      stack.emplace_back(static_cast<std::size_t>(nodes_[i].left), d + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes_[i].right), d + 1);
    }
  }
  return best;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // N_t * impurity - N_l * impurity_l - N_r * impurity_r
};

// (feature value, row) sorted lexicographically.
using Keyed = std::pair<double, std::size_t>;

double split_threshold(double a, double b) {
  const double mid = a + (b - a) / 2.0;
  return mid < b ? mid : a;
}

class ClassificationTask {
 public:
  ClassificationTask(const Eigen::MatrixXd& x, std::span<const std::size_t> labels, std::size_t k)
      : x_(x), labels_(labels), k_(k) {}

  Eigen::VectorXd leaf(const std::vector<std::size_t>& idx) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k_));
    for (auto i : idx) v[static_cast<Eigen::Index>(labels_[i])] += 1.0;
    return v / static_cast<double>(idx.size());
  }

  bool pure(const std::vector<std::size_t>& idx) const {
    return std::all_of(idx.begin(), idx.end(), [&](std::size_t i) { return labels_[i] == labels_[idx.front()]; });
  }

  double min_gain(const std::vector<std::size_t>& idx) const { return 1e-12 * static_cast<double>(idx.size()); }

  void scan(const std::vector<Keyed>& sorted, int f, std::size_t min_leaf, Split& best) const {
    const std::size_t n = sorted.size();
    std::vector<double> left(k_, 0.0), right(k_, 0.0);
    for (const auto& [v, i] : sorted) right[labels_[i]] += 1.0;
    double sq_left = 0.0, sq_right = 0.0;
    for (double c : right) sq_right += c * c;
    const double parent = sq_right / static_cast<double>(n);
    for (std::size_t p = 0; p + 1 < n; ++p) {
      const auto y = labels_[sorted[p].second];
      sq_left += 2.0 * left[y] + 1.0;
      left[y] += 1.0;
      sq_right += -2.0 * right[y] + 1.0;
      right[y] -= 1.0;
      const std::size_t nl = p + 1, nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double a = sorted[p].first;
      const double b = sorted[p + 1].first;
      if (!(a < b)) continue;
      const double gain = sq_left / static_cast<double>(nl) + sq_right / static_cast<double>(nr) - parent;
      if (gain > best.gain) best = {f, split_threshold(a, b), gain};
    }
  }

 private:
  const Eigen::MatrixXd& x_;
  std::span<const std::size_t> labels_;
  std::size_t k_;
};

class RegressionTask {
 public:
  RegressionTask(const Eigen::MatrixXd& x, std::span<const double> y) : x_(x), y_(y) {}

  Eigen::VectorXd leaf(const std::vector<std::size_t>& idx) const {
    double s = 0.0;
    for (auto i : idx) s += y_[i];
    Eigen::VectorXd v(1);
    v[0] = s / static_cast<double>(idx.size());
    return v;
  }

  bool pure(const std::vector<std::size_t>& idx) const {
    return std::all_of(idx.begin(), idx.end(), [&](std::size_t i) { return y_[i] == y_[idx.front()]; });
  }

  double min_gain(const std::vector<std::size_t>& idx) const {
    double s = 0.0;
    for (auto i : idx) s += y_[i];
    return 1e-12 * (s * s / static_cast<double>(idx.size()) + 1.0);
  }

  void scan(const std::vector<Keyed>& sorted, int f, std::size_t min_leaf, Split& best) const {
    const std::size_t n = sorted.size();
    double total = 0.0;
    for (const auto& [v, i] : sorted) total += y_[i];
    const double parent = total * total / static_cast<double>(n);
    double left = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      left += y_[sorted[p].second];
      const std::size_t nl = p + 1, nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double a = sorted[p].first;
      const double b = sorted[p + 1].first;
      if (!(a < b)) continue;
      const double right = total - left;
      const double gain = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr) - parent;
      if (gain > best.gain) best = {f, split_threshold(a, b), gain};
    }
  }

 private:
  const Eigen::MatrixXd& x_;
  std::span<const double> y_;
};

template <typename Task>
class TreeBuilder {
 public:
  TreeBuilder(const Task& task, const Eigen::MatrixXd& x, const ForestParams& params, std::mt19937_64& rng,
              double n_root)
      : task_(task), x_(x), params_(params), rng_(rng), n_root_(n_root) {
    const auto d = static_cast<std::size_t>(x.cols());
    if (params.feature_subsample > 0.0) {
      mtry_ = static_cast<std::size_t>(std::lround(params.feature_subsample * static_cast<double>(d)));
    } else {
      mtry_ = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d))));
    }
    mtry_ = std::clamp<std::size_t>(mtry_, 1, std::max<std::size_t>(d, 1));
    features_.resize(d);
    std::iota(features_.begin(), features_.end(), 0);
  }

  std::vector<TreeNode> build(std::vector<std::size_t> idx) {
    grow(std::move(idx), 0);
    return std::move(nodes_);
  }

 private:
  int grow(std::vector<std::size_t> idx, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{});
    nodes_[static_cast<std::size_t>(id)].value = task_.leaf(idx);

    const bool depth_ok = params_.max_depth == 0 || depth < params_.max_depth;
    if (!depth_ok || idx.size() < 2 * params_.min_leaf || idx.size() < 2 || task_.pure(idx)) return id;

    Split best;
    std::shuffle(features_.begin(), features_.end(), rng_);
    std::size_t tried = 0;
    std::vector<Keyed> sorted(idx.size());
    for (std::size_t fi = 0; fi < features_.size() && tried < mtry_; ++fi) {
      const int f = static_cast<int>(features_[fi]);
      const auto col = x_.col(f);
      double lo = col[static_cast<Eigen::Index>(idx.front())], hi = lo;
      for (std::size_t p = 0; p < idx.size(); ++p) {
        const double v = col[static_cast<Eigen::Index>(idx[p])];
        sorted[p] = {v, idx[p]};
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (lo == hi) continue;  // constant here; does not count towards mtry
      std::sort(sorted.begin(), sorted.end());
      ++tried;
      task_.scan(sorted, f, params_.min_leaf, best);
    }
    if (best.feature < 0 || !(best.gain > task_.min_gain(idx))) return id;

    std::vector<std::size_t> left, right;
    for (auto i : idx) {
      (x_(static_cast<Eigen::Index>(i), best.feature) <= best.threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    sorted.clear();
    sorted.shrink_to_fit();

    {
      auto& node = nodes_[static_cast<std::size_t>(id)];
      node.feature = best.feature;
      node.threshold = best.threshold;
      node.weighted_impurity_decrease = best.gain / n_root_;
      node.value.resize(0);  // only leaves carry values
    }
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const Task& task_;
  const Eigen::MatrixXd& x_;
  const ForestParams& params_;
  std::mt19937_64& rng_;
  double n_root_;
  std::size_t mtry_ = 1;
  std::vector<std::size_t> features_;
  std::vector<TreeNode> nodes_;
};

std::vector<std::size_t> draw_sample(std::size_t n, bool bootstrap, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  if (bootstrap) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (auto& i : idx) i = pick(rng);
    std::sort(idx.begin(), idx.end());
  } else {
    std::iota(idx.begin(), idx.end(), 0);
  }
  return idx;
}

template <typename Task>
std::vector<DecisionTree> grow_forest(const Task& task, const Eigen::MatrixXd& x, const ForestParams& params) {
  if (params.n_trees == 0) throw Error(ErrorCode::kInvalidArgument, "n_trees must be >= 1");
  if (params.min_leaf == 0) throw Error(ErrorCode::kInvalidArgument, "min_leaf must be >= 1");
  std::vector<DecisionTree> trees;
  trees.reserve(params.n_trees);
  const auto n = static_cast<std::size_t>(x.rows());
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    std::mt19937_64 rng(mix_seed(params.seed, t));
    auto idx = draw_sample(n, params.bootstrap, rng);
    TreeBuilder<Task> builder(task, x, params, rng, static_cast<double>(idx.size()));
    trees.emplace_back(builder.build(std::move(idx)));
  }
  return trees;
}

void check_matrix(const LabeledSet& set) {
  if (set.size() == 0) throw Error(ErrorCode::kInvalidArgument, "empty training set");
  if (static_cast<std::size_t>(set.features.cols()) != set.schema.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "feature matrix width differs from schema");
  }
  if (!set.features.allFinite()) throw Error(ErrorCode::kInvalidArgument, "training features contain NaN or inf");
}

}  // namespace

TreeEnsembleClassifier::TreeEnsembleClassifier(FeatureSchema schema, std::size_t n_classes, ForestParams params,
                                               std::vector<DecisionTree> trees)
    : schema_(std::move(schema)), n_classes_(n_classes), params_(params), trees_(std::move(trees)) {}

Eigen::VectorXd TreeEnsembleClassifier::predict_proba(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (static_cast<std::size_t>(x.size()) != schema_.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "feature vector length differs from the model schema");
  }
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_classes_));
  for (const auto& t : trees_) p += t.leaf_value(x);
  return p / static_cast<double>(trees_.size());
}

std::size_t TreeEnsembleClassifier::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return static_cast<std::size_t>(argmax_lowest(predict_proba(x)));
}

std::vector<bool> TreeEnsembleClassifier::used_features() const {
  std::vector<bool> used(schema_.size(), false);
  for (const auto& t : trees_) {
    for (const auto& n : t.nodes()) {
      if (n.feature >= 0) used[static_cast<std::size_t>(n.feature)] = true;
    }
  }
  return used;
}

RegressionForest::RegressionForest(FeatureSchema schema, ForestParams params, std::vector<DecisionTree> trees)
    : schema_(std::move(schema)), params_(params), trees_(std::move(trees)) {}

double RegressionForest::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (static_cast<std::size_t>(x.size()) != schema_.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "feature vector length differs from the model schema");
  }
  double s = 0.0;
  for (const auto& t : trees_) s += t.leaf_value(x)[0];
  return s / static_cast<double>(trees_.size());
}

TreeEnsembleClassifier train_classifier(const LabeledSet& train, std::size_t n_classes, const ForestParams& params) {
  check_matrix(train);
  std::vector<bool> present(n_classes, false);
  for (auto y : train.labels) {
    if (y >= n_classes) throw Error(ErrorCode::kInvalidArgument, "label out of range");
    present[y] = true;
  }
  if (std::count(present.begin(), present.end(), true) < 2) {
    throw Error(ErrorCode::kDegenerateLabels, "training labels contain fewer than two classes");
  }
  ClassificationTask task(train.features, train.labels, n_classes);
  return TreeEnsembleClassifier(train.schema, n_classes, params, grow_forest(task, train.features, params));
}

RegressionForest train_regression_baseline(const LabeledSet& train, const ForestParams& params) {
  check_matrix(train);
  std::vector<double> y;
  y.reserve(train.size());
  for (const auto& r : train.rows) y.push_back(r.runtime);
  RegressionTask task(train.features, y);
  return RegressionForest(train.schema, params, grow_forest(task, train.features, params));
}

Eigen::VectorXd gini_importance(const TreeEnsembleClassifier& model) {
  Eigen::VectorXd imp = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.schema().size()));
  for (const auto& t : model.trees()) {
    for (const auto& n : t.nodes()) {
      if (n.feature >= 0) imp[n.feature] += n.weighted_impurity_decrease;
    }
  }
  const double total = imp.sum();
  if (total > 0.0) imp /= total;
  return imp;
}

double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  if (!(denom > 0.0)) return 0.0;
  return da.dot(db) / denom;
}

FeatureSelection select_features(const LabeledSet& train, std::size_t n_classes, double threshold,
                                 const ForestParams& params) {
  FeatureSelection out;
  std::vector<std::size_t> current(train.schema.size());
  std::iota(current.begin(), current.end(), 0);

  for (std::size_t round = 0; round < train.schema.size() + 1; ++round) {
    const auto schema = train.schema.subset(current);
    const auto view = train.with_schema(schema);
    const auto imp = gini_importance(train_classifier(view, n_classes, params));
    if (round == 0) out.first_importance = imp;
    ++out.rounds;

    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < current.size(); ++i) {
      if (!(imp[static_cast<Eigen::Index>(i)] < threshold)) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return imp[static_cast<Eigen::Index>(a)] > imp[static_cast<Eigen::Index>(b)];
    });
    std::vector<std::size_t> kept;
    for (auto i : order) {
      const bool redundant = std::any_of(kept.begin(), kept.end(), [&](std::size_t j) {
        return std::abs(pearson(view.features.col(static_cast<Eigen::Index>(i)),
                                view.features.col(static_cast<Eigen::Index>(j)))) > kCorrelationCutoff;
      });
      if (!redundant) kept.push_back(i);
    }
    if (kept.empty()) kept.push_back(static_cast<std::size_t>(argmax_lowest(imp)));
    std::sort(kept.begin(), kept.end());

    std::vector<std::size_t> next;
    for (auto i : kept) next.push_back(current[i]);
    const bool stable = next.size() == current.size();
    current = std::move(next);
    if (stable) break;
  }
  out.kept = current;
  out.schema = train.schema.subset(current);
  return out;
}

SweepResult sweep_classifier(const LabeledSet& train, std::size_t n_classes, const ForestParams& base,
                             std::span<const std::size_t> depths, std::span<const std::size_t> min_leaves,
                             double validation_fraction) {
  static const std::size_t kDepths[] = {8, 16, 0};
  static const std::size_t kMinLeaves[] = {1, 5};
  if (depths.empty()) depths = kDepths;
  if (min_leaves.empty()) min_leaves = kMinLeaves;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return train.rows[a].submit_time < train.rows[b].submit_time;
  });
  const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(order.size())));
  if (n_val == 0 || n_val >= order.size()) throw Error(ErrorCode::kEmptySplit, "validation split is empty");
  const std::vector<std::size_t> fit_rows(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  const std::vector<std::size_t> val_rows(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  const auto fit = train.select(fit_rows);
  const auto val = train.select(val_rows);

  SweepResult result;
  double best_acc = -1.0;
  for (auto depth : depths) {
    for (auto leaf : min_leaves) {
      ForestParams p = base;
      p.max_depth = depth;
      p.min_leaf = leaf;
      const auto model = train_classifier(fit, n_classes, p);
      std::size_t correct = 0;
      for (Eigen::Index r = 0; r < val.features.rows(); ++r) {
        correct += model.predict(val.features.row(r).transpose()) == val.labels[static_cast<std::size_t>(r)];
      }
      const double acc = static_cast<double>(correct) / static_cast<double>(val.size());
      result.scores.emplace_back(p, acc);
      if (acc > best_acc) {
        best_acc = acc;
        result.best = p;
      }
    }
  }
  return result;
}

}  // namespace rvar
