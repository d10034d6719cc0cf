#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wetpred/linalg.hpp"

namespace wetpred::forest {

struct TreeNode {
  int feature = -1; // -1 marks a leaf
  double threshold = 0.0; // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0; // mean training target of the node
  std::size_t samples = 0;
  double sample_fraction = 0.0;   // p(n): node samples / root samples
  double impurity_decrease = 0.0; // var(parent) - weighted var(children); 0 at leaves

  bool is_leaf() const { return feature < 0; }
};

/// Nodes are stored in creation order; nodes[0] is the root.
struct RegressionTree {
  std::vector<TreeNode> nodes;
  std::size_t feature_count = 0;
};

struct ForestParams {
  std::size_t trees = 200;
  std::optional<std::size_t> max_depth; // unlimited when empty
  std::size_t min_samples_leaf = 2;
  std::optional<std::size_t> features_per_split; // ceil(p / 3) when empty
  bool bootstrap = true;
};

struct Forest {
  std::vector<RegressionTree> trees;
  std::vector<std::uint64_t> tree_seeds;
  ForestParams params;
  std::size_t feature_count = 0;
};

/// Greedy variance-reduction CART on all rows of x. Split candidates are
/// midpoints between consecutive distinct values; equal gains keep the lowest
/// feature index, then the lowest threshold. The random feature subset of a
/// node is drawn from a stream derived from (seed, path to the node), so a
/// depth-limited tree is an exact truncation of the unlimited one.
RegressionTree fit_tree(const Matrix& x, const Vector& y, const ForestParams& params,
                        std::uint64_t seed);

/// Same, restricted to `rows` (duplicates allowed, as in a bootstrap sample).
RegressionTree fit_tree(const Matrix& x, const Vector& y, std::span<const std::size_t> rows,
                        const ForestParams& params, std::uint64_t seed);

double predict_tree(const RegressionTree& tree, std::span<const double> x);
double predict_forest(const Forest& forest, std::span<const double> x);
Vector predict_forest(const Forest& forest, const Matrix& x);

/// Tree t uses seed derive_seed(seed, t) for both its bootstrap draw and its
/// split sampling; trees train in parallel on `jobs` threads with identical
/// results.
Forest fit_forest(const Matrix& x, const Vector& y, const ForestParams& params,
                  std::uint64_t seed, std::size_t jobs = 1);

/// Per-feature sum over nodes splitting on it of p(n) * delta_n (unnormalized).
std::vector<double> tree_importance(const RegressionTree& tree);

struct RunImportance {
  std::vector<double> values; // sums to 1 unless degenerate
  bool degenerate = false;    // no split anywhere; values are all 0
};

/// Mean-decrease-in-impurity importance averaged over trees, normalized to
/// unit sum.
RunImportance forest_importance(const Forest& forest);

struct ImportanceReport {
  std::vector<std::string> names;
  std::vector<double> mean;   // over runs
  std::vector<double> stddev; // over runs, n - 1 denominator (0 for one run)
  std::vector<std::vector<double>> per_run;
  std::size_t runs = 0;
  std::vector<std::size_t> selected; // by mean importance, descending
  bool degenerate = false;           // some run had no splits at all

  std::vector<std::string> selected_names() const;
};

/// Ranks columns by mean importance over `runs` forests (seeds
/// derive_seed(seed, run)) and keeps the top k; ties keep column order.
/// Throws KTooLarge if k is 0 or exceeds the column count.
ImportanceReport select_features(const Matrix& x, const Vector& y,
                                 std::span<const std::string> names, std::size_t k,
                                 std::size_t runs, const ForestParams& params,
                                 std::uint64_t seed, std::size_t jobs = 1);

/// Threshold mode: keeps every column whose mean importance is >= threshold.
ImportanceReport select_features_by_threshold(const Matrix& x, const Vector& y,
                                              std::span<const std::string> names,
                                              double threshold, std::size_t runs,
                                              const ForestParams& params, std::uint64_t seed,
                                              std::size_t jobs = 1);

/// Pearson correlation between columns; constant columns correlate as 0.
Matrix correlation_matrix(const Matrix& x);

} // namespace wetpred::forest
