#include "wetpred/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wetpred/error.hpp"

namespace wetpred::preprocess {

namespace {

constexpr double kBranchTol = 1e-8;
constexpr double kLambdaLo = -5.0;
constexpr double kLambdaHi = 5.0;

void check_names(const TransformParams& params, const Matrix& x,
                 std::span<const std::string> names) {
  if (static_cast<std::size_t>(x.cols()) != params.columns.size() ||
      names.size() != params.columns.size())
    throw SchemaMismatch("expected " + std::to_string(params.columns.size()) +
                         " columns, got " + std::to_string(x.cols()));
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] != params.columns[j].name)
      throw SchemaMismatch("column " + std::to_string(j) + " is '" + names[j] +
                           "', expected '" + params.columns[j].name + "'");
}

} // namespace

double yeo_johnson(double y, double lambda) {
  if (lambda == 1.0) return y;
  if (y >= 0) {
    if (std::abs(lambda) < kBranchTol) return std::log1p(y);
    return std::expm1(lambda * std::log1p(y)) / lambda;
  }
  const double p = 2.0 - lambda;
  if (std::abs(p) < kBranchTol) return -std::log1p(-y);
  return -std::expm1(p * std::log1p(-y)) / p;
}

double yeo_johnson_inverse(double z, double lambda) {
  if (lambda == 1.0) return z;
  if (z >= 0) {
    if (std::abs(lambda) < kBranchTol) return std::expm1(z);
    const double base = lambda * z;
    if (!(base > -1.0))
      throw OutOfRange("z = " + std::to_string(z) + " outside the image for lambda = " +
                       std::to_string(lambda));
    return std::expm1(std::log1p(base) / lambda);
  }
  const double p = 2.0 - lambda;
  if (std::abs(p) < kBranchTol) return -std::expm1(-z);
  const double base = -p * z;
  if (!(base > -1.0))
    throw OutOfRange("z = " + std::to_string(z) + " outside the image for lambda = " +
                     std::to_string(lambda));
  return -std::expm1(std::log1p(base) / p);
}

double yeo_johnson_log_likelihood(std::span<const double> column, double lambda) {
  const double n = static_cast<double>(column.size());
  double mean = 0;
  for (double y : column) mean += yeo_johnson(y, lambda);
  mean /= n;
  double var = 0;
  double jacobian = 0;
  for (double y : column) {
    const double d = yeo_johnson(y, lambda) - mean;
    var += d * d;
    jacobian += std::copysign(std::log1p(std::abs(y)), y);
  }
  var /= n;
  if (!(var > 0) || !std::isfinite(var)) return -std::numeric_limits<double>::infinity();
  return -0.5 * n * std::log(var) + (lambda - 1.0) * jacobian;
}

double fit_lambda(std::span<const double> column) {
  if (column.size() < 3) throw TooFewSamples("fit_lambda needs at least 3 values");
  const auto [lo_it, hi_it] = std::minmax_element(column.begin(), column.end());
  if (*lo_it == *hi_it) throw ConstantColumn("column has a single distinct value");

  auto ll = [&](double l) { return yeo_johnson_log_likelihood(column, l); };

  constexpr int kSteps = 100;
  const double step = (kLambdaHi - kLambdaLo) / kSteps;
  int best_i = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kSteps; ++i) {
    const double v = ll(kLambdaLo + i * step);
    if (v > best_ll) {
      best_ll = v;
      best_i = i;
    }
  }
  const double grid_best = kLambdaLo + best_i * step;

  double a = std::max(kLambdaLo, grid_best - step);
  double b = std::min(kLambdaHi, grid_best + step);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = ll(c);
  double fd = ll(d);
  while (b - a > 1e-6) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = ll(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = ll(d);
    }
  }
  const double refined = 0.5 * (a + b);
  return ll(refined) >= best_ll ? refined : grid_best;
}

std::vector<std::string> TransformParams::names() const {
  std::vector<std::string> out;
  out.reserve(columns.size());
  for (const auto& c : columns) out.push_back(c.name);
  return out;
}

TransformParams fit_transformer(const Matrix& x, std::span<const std::string> names) {
  if (x.cols() == 0) throw EmptyMatrix("no feature columns");
  if (x.rows() < 3) throw TooFewSamples("fit_transformer needs at least 3 rows");
  if (names.size() != static_cast<std::size_t>(x.cols()))
    throw SchemaMismatch("column name count does not match matrix width");

  TransformParams params;
  params.columns.resize(names.size());
  std::vector<double> col(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) col[i] = x(i, j);
    auto& ct = params.columns[j];
    ct.name = names[j];
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    if (*lo == *hi) {
      ct.lambda = 1.0;
      ct.mean = col[0];
      ct.stddev = 1.0;
      continue;
    }
    ct.lambda = fit_lambda(col);
    double mean = 0;
    for (double& v : col) {
      v = yeo_johnson(v, ct.lambda);
      mean += v;
    }
    mean /= static_cast<double>(col.size());
    double var = 0;
    for (double v : col) var += (v - mean) * (v - mean);
    var /= static_cast<double>(col.size());
    ct.mean = mean;
    // A non-constant column can still collapse under an extreme lambda.
    ct.stddev = var > 0 ? std::sqrt(var) : 1.0;
  }
  return params;
}

Matrix apply_transformer(const TransformParams& params, const Matrix& x,
                         std::span<const std::string> names) {
  check_names(params, x, names);
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto& ct = params.columns[j];
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      out(i, j) = (yeo_johnson(x(i, j), ct.lambda) - ct.mean) / ct.stddev;
  }
  return out;
}

Matrix inverse_transformer(const TransformParams& params, const Matrix& z,
                           std::span<const std::string> names) {
  check_names(params, z, names);
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const auto& ct = params.columns[j];
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      out(i, j) = yeo_johnson_inverse(z(i, j) * ct.stddev + ct.mean, ct.lambda);
  }
  return out;
}

TargetScaler TargetScaler::fit(const Vector& y) {
  if (y.size() == 0) throw EmptyVector("cannot scale an empty target");
  TargetScaler s;
  s.mean = y.mean();
  const double var = (y.array() - s.mean).square().mean();
  s.stddev = var > 0 ? std::sqrt(var) : 1.0;
  return s;
}

} // namespace wetpred::preprocess
