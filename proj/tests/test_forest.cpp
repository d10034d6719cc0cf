#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "wetpred/error.hpp"
#include "wetpred/forest.hpp"

using namespace wetpred;
using namespace wetpred::forest;

namespace {

ForestParams exhaustive(std::size_t p) {
  ForestParams fp;
  fp.trees = 1;
  fp.min_samples_leaf = 1;
  fp.features_per_split = p;
  fp.bootstrap = false;
  return fp;
}

void random_problem(std::size_t n, std::size_t p, std::mt19937_64& rng, Matrix& x, Vector& y) {
  std::normal_distribution<double> g(0, 1);
  x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  y.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = g(rng);
    y(i) = 3 * x(i, 0) - 2 * x(i, 1) * x(i, 1) + 0.3 * g(rng);
  }
}

double walk(const RegressionTree& t, std::span<const double> x, std::size_t depth) {
  int n = 0;
  for (std::size_t d = 0; d < depth && !t.nodes[n].is_leaf(); ++d) {
    const auto& node = t.nodes[n];
    n = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return t.nodes[n].value;
}

std::vector<std::string> names_for(std::size_t p) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < p; ++j) out.push_back("f" + std::to_string(j));
  return out;
}

} // namespace

TEST_CASE("two-feature hand example") {
  Matrix x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  Vector y(4);
  y << 0, 1, 10, 11;
  const auto tree = fit_tree(x, y, exhaustive(2), 1);
  REQUIRE(tree.nodes[0].feature == 0);
  CHECK(tree.nodes[0].threshold == 0.5);
  CHECK(tree.nodes[0].impurity_decrease == doctest::Approx(25.0));
  const auto raw = tree_importance(tree);
  CHECK(raw[0] == doctest::Approx(25.0).epsilon(1e-14));
  CHECK(raw[1] == doctest::Approx(0.25).epsilon(1e-14));

  Forest f;
  f.trees = {tree};
  f.feature_count = 2;
  const auto imp = forest_importance(f);
  CHECK(imp.values[0] == doctest::Approx(25.0 / 25.25).epsilon(1e-14));
  CHECK(imp.values[1] == doctest::Approx(0.25 / 25.25).epsilon(1e-14));

  for (Eigen::Index i = 0; i < 4; ++i) CHECK(predict_tree(tree, row_span(x, i)) == y(i));
}

TEST_CASE("root split is the exhaustive optimum") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 10 + rng() % 30;
    const std::size_t p = 1 + rng() % 5;
    Matrix x;
    Vector y;
    random_problem(n, p, rng, x, y);
    if (trial % 3 == 0) x = x.array().round(); // force ties
    std::vector<std::vector<double>> rows(n, std::vector<double>(p));
    std::vector<double> yy(n);
    for (std::size_t i = 0; i < n; ++i) {
      yy[i] = y(static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < p; ++j)
        rows[i][j] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_f = 0;
    double best_t = 0;
    for (std::size_t f = 0; f < p; ++f) {
      std::vector<double> vals;
      for (const auto& r : rows) vals.push_back(r[f]);
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
        const double t = vals[k] + (vals[k + 1] - vals[k]) / 2;
        const double sse = oracle::children_sse(rows, yy, f, t);
        if (!std::isfinite(best) || sse < best - 1e-9 * std::max(1.0, best)) {
          best = sse;
          best_f = f;
          best_t = t;
        }
      }
    }
    const auto tree = fit_tree(x, y, exhaustive(p), 7);
    if (!std::isfinite(best)) {
      CHECK(tree.nodes[0].is_leaf());
      continue;
    }
    REQUIRE_FALSE(tree.nodes[0].is_leaf());
    CHECK(static_cast<std::size_t>(tree.nodes[0].feature) == best_f);
    CHECK(tree.nodes[0].threshold == doctest::Approx(best_t).epsilon(1e-12));
    const double mean = y.mean();
    const double parent = (y.array() - mean).square().sum();
    CHECK(tree.nodes[0].impurity_decrease ==
          doctest::Approx((parent - best) / static_cast<double>(n)).epsilon(1e-9));
  }
}

TEST_CASE("tree invariants") {
  std::mt19937_64 rng(32);
  Matrix x;
  Vector y;
  random_problem(80, 6, rng, x, y);
  ForestParams fp;
  fp.min_samples_leaf = 3;
  const auto tree = fit_tree(x, y, fp, 5);
  for (const auto& node : tree.nodes) {
    CHECK(node.samples >= 3);
    CHECK(node.impurity_decrease >= 0.0);
    if (node.is_leaf()) continue;
    const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
    const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
    CHECK(l.samples + r.samples == node.samples);
    CHECK(l.sample_fraction + r.sample_fraction == doctest::Approx(node.sample_fraction));
  }
  CHECK(tree.nodes[0].sample_fraction == 1.0);
}

TEST_CASE("depth limit truncates the unlimited tree") {
  std::mt19937_64 rng(33);
  Matrix x;
  Vector y;
  random_problem(120, 5, rng, x, y);
  ForestParams fp;
  fp.min_samples_leaf = 1;
  const auto full = fit_tree(x, y, fp, 9);
  for (std::size_t d : {0u, 1u, 2u, 4u}) {
    auto lim = fp;
    lim.max_depth = d;
    const auto cut = fit_tree(x, y, lim, 9);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      CHECK(predict_tree(cut, row_span(x, i)) == walk(full, row_span(x, i), d));
  }
}

TEST_CASE("identical trees from identical seeds") {
  std::mt19937_64 rng(34);
  Matrix x;
  Vector y;
  random_problem(60, 4, rng, x, y);
  ForestParams fp;
  fp.trees = 12;
  const auto a = fit_forest(x, y, fp, 77, 1);
  const auto b = fit_forest(x, y, fp, 77, 3);
  REQUIRE(a.trees.size() == b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
    for (std::size_t n = 0; n < a.trees[t].nodes.size(); ++n) {
      CHECK(a.trees[t].nodes[n].feature == b.trees[t].nodes[n].feature);
      CHECK(a.trees[t].nodes[n].threshold == b.trees[t].nodes[n].threshold);
      CHECK(a.trees[t].nodes[n].value == b.trees[t].nodes[n].value);
    }
  }
  const Vector pa = predict_forest(a, x);
  const Vector pb = predict_forest(b, x);
  CHECK(pa == pb);
  const auto c = fit_forest(x, y, fp, 78, 1);
  CHECK(predict_forest(c, x) != pa);
}

TEST_CASE("importance") {
  std::mt19937_64 rng(35);
  Matrix x;
  Vector y;
  random_problem(100, 8, rng, x, y);
  ForestParams fp;
  fp.trees = 30;
  const auto f = fit_forest(x, y, fp, 3);
  const auto imp = forest_importance(f);
  CHECK_FALSE(imp.degenerate);
  CHECK(std::accumulate(imp.values.begin(), imp.values.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : imp.values) CHECK(v >= 0.0);

  SUBCASE("constant target is degenerate") {
    const Vector flat = Vector::Constant(100, 4.0);
    const auto d = forest_importance(fit_forest(x, flat, fp, 3));
    CHECK(d.degenerate);
    for (double v : d.values) CHECK(v == 0.0);
  }
}

TEST_CASE("column permutation permutes importance") {
  std::mt19937_64 rng(36);
  Matrix x;
  Vector y;
  random_problem(70, 5, rng, x, y);
  ForestParams fp;
  fp.trees = 10;
  fp.features_per_split = 5;
  // Small nodes often admit several splits with the same partition; keep
  // nodes large so the optimum is unique.
  fp.max_depth = 3;
  fp.min_samples_leaf = 8;
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  const Matrix xp = take_cols(x, perm);
  const auto a = forest_importance(fit_forest(x, y, fp, 12)).values;
  const auto b = forest_importance(fit_forest(xp, y, fp, 12)).values;
  for (std::size_t j = 0; j < perm.size(); ++j) CHECK(b[j] == doctest::Approx(a[perm[j]]).epsilon(1e-9));
}

TEST_CASE("select_features") {
  std::mt19937_64 rng(37);
  Matrix x;
  Vector y;
  random_problem(150, 10, rng, x, y);
  const auto names = names_for(10);
  ForestParams fp;
  fp.trees = 40;

  const auto rep = select_features(x, y, names, 3, 4, fp, 5);
  CHECK(rep.runs == 4);
  CHECK(rep.per_run.size() == 4);
  REQUIRE(rep.selected.size() == 3);
  CHECK(std::find(rep.selected.begin(), rep.selected.end(), 0u) != rep.selected.end());
  CHECK(std::find(rep.selected.begin(), rep.selected.end(), 1u) != rep.selected.end());
  for (std::size_t i = 1; i < rep.selected.size(); ++i)
    CHECK(rep.mean[rep.selected[i - 1]] >= rep.mean[rep.selected[i]]);
  for (std::size_t j = 0; j < 10; ++j) {
    double s = 0, s2 = 0;
    for (const auto& r : rep.per_run) s += r[j];
    const double m = s / 4;
    for (const auto& r : rep.per_run) s2 += (r[j] - m) * (r[j] - m);
    CHECK(rep.mean[j] == doctest::Approx(m).epsilon(1e-12));
    CHECK(rep.stddev[j] == doctest::Approx(std::sqrt(s2 / 3)).epsilon(1e-9));
  }
  CHECK(rep.selected_names()[0] == names[rep.selected[0]]);

  SUBCASE("jobs invariance") {
    const auto par = select_features(x, y, names, 3, 4, fp, 5, 3);
    CHECK(par.mean == rep.mean);
    CHECK(par.selected == rep.selected);
  }

  SUBCASE("threshold mode") {
    const auto th = select_features_by_threshold(x, y, names, 0.05, 4, fp, 5);
    for (std::size_t j = 0; j < 10; ++j) {
      const bool kept = std::find(th.selected.begin(), th.selected.end(), j) != th.selected.end();
      CHECK(kept == (th.mean[j] >= 0.05));
    }
  }

  SUBCASE("k bounds") {
    CHECK_THROWS_AS(select_features(x, y, names, 0, 2, fp, 5), KTooLarge);
    CHECK_THROWS_AS(select_features(x, y, names, 11, 2, fp, 5), KTooLarge);
    CHECK_NOTHROW(select_features(x, y, names, 10, 1, fp, 5));
  }
}

TEST_CASE("correlation_matrix") {
  Matrix x(5, 3);
  x << 1, 2, 7, 2, 4, 7, 3, 6, 7, 4, 8, 7, 5, 10.5, 7;
  const Matrix c = correlation_matrix(x);
  CHECK(c(0, 0) == doctest::Approx(1.0));
  CHECK(c(0, 1) == doctest::Approx(c(1, 0)));
  CHECK(c(0, 1) > 0.99);
  CHECK(c(0, 2) == 0.0);
}

TEST_CASE("input validation") {
  Matrix x(3, 2);
  x.setZero();
  Vector y(2);
  CHECK_THROWS_AS(fit_tree(x, y, ForestParams{}, 1), DimensionMismatch);
  CHECK_THROWS_AS(fit_tree(Matrix(0, 2), Vector(0), ForestParams{}, 1), EmptyData);
}

TEST_CASE("step target") {
  Matrix x(20, 2);
  Vector y(20);
  for (Eigen::Index i = 0; i < 20; ++i) {
    x(i, 0) = static_cast<double>(i) / 19.0;
    x(i, 1) = static_cast<double>((i * 7) % 20);
    y(i) = x(i, 0) > 0.5 ? 1.0 : 0.0;
  }
  const auto tree = fit_tree(x, y, exhaustive(2), 3);
  CHECK(tree.nodes.size() == 3);
  CHECK(tree.nodes[0].feature == 0);
  for (Eigen::Index i = 0; i < 20; ++i) CHECK(predict_tree(tree, row_span(x, i)) == y(i));
}

TEST_CASE("constant target gives a single leaf") {
  Matrix x = Matrix::Random(15, 3);
  const auto tree = fit_tree(x, Vector::Constant(15, 2.5), exhaustive(3), 3);
  REQUIRE(tree.nodes.size() == 1);
  CHECK(tree.nodes[0].is_leaf());
  CHECK(tree.nodes[0].impurity_decrease == 0.0);
  const std::vector<double> anywhere{100, -100, 3};
  CHECK(predict_tree(tree, anywhere) == 2.5);
  for (double v : tree_importance(tree)) CHECK(v == 0.0);
}

TEST_CASE("forest edge cases") {
  std::mt19937_64 rng(38);
  Matrix x;
  Vector y;
  random_problem(50, 4, rng, x, y);

  SUBCASE("one tree without bootstrap equals fit_tree") {
    auto fp = exhaustive(4);
    fp.features_per_split.reset();
    const auto f = fit_forest(x, y, fp, 21);
    const auto t = fit_tree(x, y, fp, f.tree_seeds[0]);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      CHECK(predict_forest(f, row_span(x, i)) == predict_tree(t, row_span(x, i)));
  }

  SUBCASE("identical trees average to one tree") {
    const auto t = fit_tree(x, y, ForestParams{}, 4);
    Forest f;
    f.trees = {t, t, t, t};
    f.feature_count = 4;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      CHECK(predict_forest(f, row_span(x, i)) == doctest::Approx(predict_tree(t, row_span(x, i))).epsilon(1e-15));
  }

  SUBCASE("overfit forest reproduces training targets") {
    auto fp = exhaustive(4);
    fp.trees = 5;
    const Vector p = predict_forest(fit_forest(x, y, fp, 8), x);
    for (Eigen::Index i = 0; i < x.rows(); ++i) CHECK(p(i) == doctest::Approx(y(i)).epsilon(1e-12));
  }
}

TEST_CASE("forest generalizes on a noisy linear target") {
  std::mt19937_64 rng(39);
  std::normal_distribution<double> g(0, 1);
  Matrix x(500, 5);
  Vector y(500);
  for (Eigen::Index i = 0; i < 500; ++i) {
    for (Eigen::Index j = 0; j < 5; ++j) x(i, j) = g(rng);
    y(i) = 2 * x(i, 0) + x(i, 1) - 0.5 * x(i, 2) + 0.5 * g(rng);
  }
  ForestParams fp;
  fp.trees = 60;
  const auto f = fit_forest(x.topRows(400), y.head(400), fp, 2);
  const Vector p = predict_forest(f, x.bottomRows(100));
  const Vector t = y.tail(100);
  const double sse = (p - t).squaredNorm();
  const double sst = (t.array() - t.mean()).square().sum();
  CHECK(1 - sse / sst > 0.7);
}

TEST_CASE("single informative feature dominates") {
  std::mt19937_64 rng(40);
  std::uniform_real_distribution<double> u(0, 1);
  Matrix x(300, 10);
  Vector y(300);
  for (Eigen::Index i = 0; i < 300; ++i) {
    for (Eigen::Index j = 0; j < 10; ++j) x(i, j) = u(rng);
    y(i) = 10 * x(i, 3);
  }
  ForestParams fp;
  fp.trees = 50;
  fp.features_per_split = 10;
  const auto imp = forest_importance(fit_forest(x, y, fp, 6));
  CHECK(imp.values[3] > 0.9);
}

TEST_CASE("k equal to the column count keeps everything by rank") {
  std::mt19937_64 rng(41);
  Matrix x;
  Vector y;
  random_problem(60, 5, rng, x, y);
  ForestParams fp;
  fp.trees = 10;
  const auto rep = select_features(x, y, names_for(5), 5, 2, fp, 3);
  REQUIRE(rep.selected.size() == 5);
  for (std::size_t i = 1; i < 5; ++i) CHECK(rep.mean[rep.selected[i - 1]] >= rep.mean[rep.selected[i]]);
}
