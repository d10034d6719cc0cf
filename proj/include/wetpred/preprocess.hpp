#pragma once

#include <span>
#include <string>
#include <vector>

#include "wetpred/linalg.hpp"

namespace wetpred::preprocess {

/// Yeo-Johnson power transform. The log branches are taken when
/// |lambda| < 1e-8 (y >= 0) or |lambda - 2| < 1e-8 (y < 0).
double yeo_johnson(double y, double lambda);

/// Exact inverse of yeo_johnson. Throws OutOfRange when z is outside the
/// image of the forward map (e.g. lambda * z + 1 <= 0 on the z >= 0 branch).
double yeo_johnson_inverse(double z, double lambda);

/// Profile log-likelihood of a Gaussian fit to the transformed column:
/// -n/2 log(var) + (lambda - 1) * sum sign(y) log(|y| + 1), biased variance.
/// Returns -inf when the transformed variance is zero or not finite.
double yeo_johnson_log_likelihood(std::span<const double> column, double lambda);

/// Maximum-likelihood lambda on [-5, 5]. A 0.1-step scan brackets the
/// optimum, then golden-section search refines it to 1e-6.
/// Throws ConstantColumn with fewer than two distinct values.
double fit_lambda(std::span<const double> column);

struct ColumnTransform {
  std::string name;
  double lambda = 1.0;
  double mean = 0.0;   // of the transformed column
  double stddev = 1.0; // of the transformed column, population
};

/// Per-column transform-then-standardize parameters. Immutable once fitted.
struct TransformParams {
  std::vector<ColumnTransform> columns;

  std::vector<std::string> names() const;
};

/// Fits lambda per column, then records mean/std of the transformed values.
/// Constant columns get lambda = 1, mean = the value, std = 1.
/// Throws EmptyMatrix for zero columns, TooFewSamples below 3 rows.
TransformParams fit_transformer(const Matrix& x, std::span<const std::string> names);

/// Throws SchemaMismatch when `names` differ from the fitted columns.
Matrix apply_transformer(const TransformParams& params, const Matrix& x,
                         std::span<const std::string> names);
Matrix inverse_transformer(const TransformParams& params, const Matrix& z,
                           std::span<const std::string> names);

/// z-scoring for the regression target; targets are never power-transformed.
struct TargetScaler {
  double mean = 0.0;
  double stddev = 1.0;

  static TargetScaler fit(const Vector& y);
  Vector apply(const Vector& y) const { return ((y.array() - mean) / stddev).matrix(); }
  double inverse(double z) const { return z * stddev + mean; }
  Vector inverse(const Vector& z) const { return (z.array() * stddev + mean).matrix(); }
};

} // namespace wetpred::preprocess
