#include "wetpred/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wetpred/error.hpp"
#include "wetpred/parallel.hpp"
#include "wetpred/rng.hpp"

namespace wetpred::forest {

namespace {

constexpr std::uint64_t kBootstrapStream = 0xb0075;
constexpr std::uint64_t kNodeStream = 0x90de;

class TreeBuilder {
public:
  TreeBuilder(const Eigen::MatrixXd& x, const Vector& y, const ForestParams& params, std::uint64_t seed,
              std::vector<std::size_t> rows)
      : x_(x), y_(y), params_(params), seed_(seed), rows_(std::move(rows)),
        min_leaf_(std::max<std::size_t>(1, params.min_samples_leaf)),
        root_n_(static_cast<double>(rows_.size())) {
    const auto p = static_cast<std::size_t>(x.cols());
    mtry_ = params.features_per_split.value_or((p + 2) / 3);
    mtry_ = std::clamp<std::size_t>(mtry_, 1, p);
    all_features_.resize(p);
  }

  RegressionTree build() {
    RegressionTree tree;
    tree.feature_count = static_cast<std::size_t>(x_.cols());
    grow(0, rows_.size(), 0, 0);
    tree.nodes = std::move(nodes_);
    return tree;
  }

private:
  double sse(std::size_t begin, std::size_t end, double mean) const {
    double s = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const double d = y_(static_cast<Eigen::Index>(rows_[i])) - mean;
      s += d * d;
    }
    return s;
  }

  double mean(std::size_t begin, std::size_t end) const {
    double s = 0;
    for (std::size_t i = begin; i < end; ++i) s += y_(static_cast<Eigen::Index>(rows_[i]));
    return s / static_cast<double>(end - begin);
  }

  bool pure(std::size_t begin, std::size_t end) const {
    const double first = y_(static_cast<Eigen::Index>(rows_[begin]));
    for (std::size_t i = begin + 1; i < end; ++i)
      if (y_(static_cast<Eigen::Index>(rows_[i])) != first) return false;
    return true;
  }

  int grow(std::size_t begin, std::size_t end, std::size_t depth, std::uint64_t key) {
    const std::size_t n = end - begin;
    const int id = static_cast<int>(nodes_.size());
    {
      TreeNode node;
      node.value = mean(begin, end);
      node.samples = n;
      node.sample_fraction = static_cast<double>(n) / root_n_;
      nodes_.push_back(node);
    }
    if (params_.max_depth && depth >= *params_.max_depth) return id;
    if (n < 2 * min_leaf_ || pure(begin, end)) return id;

    Rng rng(derive_seed(seed_, kNodeStream, key));
    std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
    for (std::size_t i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, all_features_.size() - 1);
      std::swap(all_features_[i], all_features_[pick(rng)]);
    }
    std::vector<std::size_t> candidates(all_features_.begin(),
                                        all_features_.begin() + static_cast<std::ptrdiff_t>(mtry_));
    std::sort(candidates.begin(), candidates.end());

    double total = 0;
    for (std::size_t i = begin; i < end; ++i) total += y_(static_cast<Eigen::Index>(rows_[i]));

    // Maximizing S_L^2/n_L + S_R^2/n_R minimizes the children's summed SSE.
    double best_score = -std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0;
    for (std::size_t f : candidates) {
      const auto col = static_cast<Eigen::Index>(f);
      const double* column = x_.data() + col * x_.rows();
      sorted_.clear();
      for (std::size_t i = begin; i < end; ++i)
        sorted_.emplace_back(column[rows_[i]], y_(static_cast<Eigen::Index>(rows_[i])));
      std::sort(sorted_.begin(), sorted_.end());
      if (sorted_.front().first == sorted_.back().first) continue;

      double left_sum = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += sorted_[i].second;
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nr < min_leaf_) break;
        if (nl < min_leaf_ || sorted_[i].first == sorted_[i + 1].first) continue;
        const double right_sum = total - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(nl) +
                             right_sum * right_sum / static_cast<double>(nr);
        if (score > best_score) {
          best_score = score;
          best_feature = static_cast<int>(f);
          const double a = sorted_[i].first;
          const double b = sorted_[i + 1].first;
          double mid = a + (b - a) / 2;
          if (mid >= b) mid = a;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return id;

    const auto col = static_cast<Eigen::Index>(best_feature);
    const auto split = std::stable_partition(
        rows_.begin() + static_cast<std::ptrdiff_t>(begin),
        rows_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t r) {
          return x_(static_cast<Eigen::Index>(r), col) <= best_threshold;
        });
    const auto mid = static_cast<std::size_t>(split - rows_.begin());

    const double parent_sse = sse(begin, end, nodes_[id].value);
    const double left_sse = sse(begin, mid, mean(begin, mid));
    const double right_sse = sse(mid, end, mean(mid, end));
    const double decrease = (parent_sse - left_sse - right_sse) / static_cast<double>(n);
    if (!(decrease > 0)) return id;

    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    nodes_[id].impurity_decrease = decrease;
    const int left = grow(begin, mid, depth + 1, derive_seed(key, 1));
    nodes_[id].left = left;
    const int right = grow(mid, end, depth + 1, derive_seed(key, 2));
    nodes_[id].right = right;
    return id;
  }

  const Eigen::MatrixXd& x_; // column-major copy of the training matrix
  const Vector& y_;
  const ForestParams& params_;
  std::uint64_t seed_;
  std::vector<std::size_t> rows_;
  std::size_t min_leaf_;
  double root_n_;
  std::size_t mtry_ = 1;
  std::vector<std::size_t> all_features_;
  std::vector<std::pair<double, double>> sorted_; // (feature value, target)
  std::vector<TreeNode> nodes_;
};

void check_training_data(const Matrix& x, const Vector& y) {
  if (x.rows() == 0 || x.cols() == 0) throw EmptyData("no training data");
  if (x.rows() != y.size()) throw DimensionMismatch("feature rows and targets differ in count");
  if (x.rows() < 2) throw EmptyData("need at least 2 samples");
}

RegressionTree build_tree(const Eigen::MatrixXd& xc, const Vector& y,
                          std::span<const std::size_t> rows, const ForestParams& params,
                          std::uint64_t seed) {
  if (rows.empty()) throw EmptyData("no rows selected");
  TreeBuilder builder(xc, y, params, seed, std::vector<std::size_t>(rows.begin(), rows.end()));
  return builder.build();
}

} // namespace

RegressionTree fit_tree(const Matrix& x, const Vector& y, std::span<const std::size_t> rows,
                        const ForestParams& params, std::uint64_t seed) {
  check_training_data(x, y);
  const Eigen::MatrixXd xc = x;
  return build_tree(xc, y, rows, params, seed);
}

RegressionTree fit_tree(const Matrix& x, const Vector& y, const ForestParams& params,
                        std::uint64_t seed) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(x.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit_tree(x, y, rows, params, seed);
}

double predict_tree(const RegressionTree& tree, std::span<const double> x) {
  if (x.size() != tree.feature_count)
    throw DimensionMismatch("tree expects " + std::to_string(tree.feature_count) +
                            " features, got " + std::to_string(x.size()));
  const TreeNode* node = &tree.nodes.front();
  while (!node->is_leaf())
    node = &tree.nodes[static_cast<std::size_t>(
        x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                      : node->right)];
  return node->value;
}

double predict_forest(const Forest& forest, std::span<const double> x) {
  double s = 0;
  for (const auto& t : forest.trees) s += predict_tree(t, x);
  return s / static_cast<double>(forest.trees.size());
}

Vector predict_forest(const Forest& forest, const Matrix& x) {
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_forest(forest, row_span(x, i));
  return out;
}

Forest fit_forest(const Matrix& x, const Vector& y, const ForestParams& params,
                  std::uint64_t seed, std::size_t jobs) {
  check_training_data(x, y);
  if (params.trees == 0) throw DataError("forest needs at least one tree");
  Forest forest;
  forest.params = params;
  forest.feature_count = static_cast<std::size_t>(x.cols());
  forest.trees.resize(params.trees);
  forest.tree_seeds.resize(params.trees);
  const auto n = static_cast<std::size_t>(x.rows());
  const Eigen::MatrixXd xc = x;
  parallel_for(params.trees, jobs, [&](std::size_t t) {
    const std::uint64_t tree_seed = derive_seed(seed, t);
    forest.tree_seeds[t] = tree_seed;
    std::vector<std::size_t> rows(n);
    if (params.bootstrap) {
      Rng rng(derive_seed(tree_seed, kBootstrapStream));
      std::uniform_int_distribution<std::size_t> draw(0, n - 1);
      for (auto& r : rows) r = draw(rng);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    forest.trees[t] = build_tree(xc, y, rows, params, tree_seed);
  });
  return forest;
}

std::vector<double> tree_importance(const RegressionTree& tree) {
  std::vector<double> imp(tree.feature_count, 0.0);
  for (const auto& node : tree.nodes)
    if (!node.is_leaf())
      imp[static_cast<std::size_t>(node.feature)] += node.sample_fraction * node.impurity_decrease;
  return imp;
}

RunImportance forest_importance(const Forest& forest) {
  RunImportance run;
  run.values.assign(forest.feature_count, 0.0);
  for (const auto& tree : forest.trees) {
    const auto imp = tree_importance(tree);
    for (std::size_t j = 0; j < imp.size(); ++j) run.values[j] += imp[j];
  }
  const double nt = static_cast<double>(forest.trees.size());
  double total = 0;
  for (double& v : run.values) {
    v /= nt;
    total += v;
  }
  if (!(total > 0)) {
    run.degenerate = true;
    std::fill(run.values.begin(), run.values.end(), 0.0);
    return run;
  }
  for (double& v : run.values) v /= total;
  return run;
}

std::vector<std::string> ImportanceReport::selected_names() const {
  std::vector<std::string> out;
  out.reserve(selected.size());
  for (auto j : selected) out.push_back(names[j]);
  return out;
}

namespace {

ImportanceReport importance_runs(const Matrix& x, const Vector& y,
                                 std::span<const std::string> names, std::size_t runs,
                                 const ForestParams& params, std::uint64_t seed,
                                 std::size_t jobs) {
  if (names.size() != static_cast<std::size_t>(x.cols()))
    throw SchemaMismatch("column name count does not match matrix width");
  if (runs == 0) throw DataError("importance needs at least one run");
  const std::size_t p = names.size();
  ImportanceReport report;
  report.names.assign(names.begin(), names.end());
  report.runs = runs;
  report.per_run.reserve(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    const auto forest = fit_forest(x, y, params, derive_seed(seed, r), jobs);
    auto run = forest_importance(forest);
    report.degenerate = report.degenerate || run.degenerate;
    report.per_run.push_back(std::move(run.values));
  }
  report.mean.assign(p, 0.0);
  report.stddev.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double m = 0;
    for (const auto& run : report.per_run) m += run[j];
    m /= static_cast<double>(runs);
    double v = 0;
    for (const auto& run : report.per_run) v += (run[j] - m) * (run[j] - m);
    report.mean[j] = m;
    report.stddev[j] = runs > 1 ? std::sqrt(v / static_cast<double>(runs - 1)) : 0.0;
  }
  return report;
}

std::vector<std::size_t> ranking(const std::vector<double>& mean) {
  std::vector<std::size_t> order(mean.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
  return order;
}

} // namespace

ImportanceReport select_features(const Matrix& x, const Vector& y,
                                 std::span<const std::string> names, std::size_t k,
                                 std::size_t runs, const ForestParams& params,
                                 std::uint64_t seed, std::size_t jobs) {
  if (k == 0 || k > static_cast<std::size_t>(x.cols()))
    throw KTooLarge("k = " + std::to_string(k) + " but there are " +
                    std::to_string(x.cols()) + " features");
  auto report = importance_runs(x, y, names, runs, params, seed, jobs);
  auto order = ranking(report.mean);
  order.resize(k);
  report.selected = std::move(order);
  return report;
}

ImportanceReport select_features_by_threshold(const Matrix& x, const Vector& y,
                                              std::span<const std::string> names,
                                              double threshold, std::size_t runs,
                                              const ForestParams& params, std::uint64_t seed,
                                              std::size_t jobs) {
  auto report = importance_runs(x, y, names, runs, params, seed, jobs);
  for (auto j : ranking(report.mean))
    if (report.mean[j] >= threshold) report.selected.push_back(j);
  return report;
}

Matrix correlation_matrix(const Matrix& x) {
  const auto p = x.cols();
  const RowVector mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean;
  const Matrix cov = centered.transpose() * centered;
  Matrix corr(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = 0; b < p; ++b) {
      const double denom = std::sqrt(cov(a, a) * cov(b, b));
      corr(a, b) = denom > 0 ? cov(a, b) / denom : 0.0;
    }
  }
  return corr;
}

} // namespace wetpred::forest
