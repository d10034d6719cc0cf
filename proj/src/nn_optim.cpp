#include <cmath>
#include <limits>

#include "wetpred/error.hpp"
#include "wetpred/nn.hpp"

namespace wetpred::nn {

double clip_gradients(std::span<const std::span<double>> grads, double max_norm) {
  if (!(max_norm > 0)) throw DataError("clip norm must be positive");
  double sq = 0;
  for (const auto& g : grads)
    for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& g : grads)
      for (double& v : g) v *= scale;
  }
  return norm;
}

double clip_gradients(Parameters& grads, double max_norm) {
  const auto views = grads.views();
  return clip_gradients(views, max_norm);
}

OptimizerState make_optimizer_state(std::span<const std::span<double>> params,
                                    const AdamWConfig& config) {
  OptimizerState s;
  s.config = config;
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adamw_step(std::span<const std::span<double>> params,
                std::span<const std::span<const double>> grads, OptimizerState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw DimensionMismatch("parameter, gradient and optimizer tensors differ in count");
  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    const auto& g = grads[k];
    const auto& p = params[k];
    if (p.size() != g.size() || p.size() != m.size())
      throw DimensionMismatch("tensor " + std::to_string(k) + " changed shape");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= c.learning_rate * (m_hat / (std::sqrt(v_hat) + c.epsilon) + c.weight_decay * p[i]);
    }
  }
}

PlateauScheduler::PlateauScheduler(std::size_t patience, double factor, double threshold)
    : patience_(patience), factor_(factor), threshold_(threshold),
      best_(std::numeric_limits<double>::infinity()) {
  if (patience_ < 1) throw DataError("scheduler patience must be at least 1");
  if (!(factor_ > 0 && factor_ < 1)) throw DataError("scheduler factor must lie in (0, 1)");
}

bool PlateauScheduler::step(double validation_loss, double& learning_rate) {
  if (validation_loss < best_ - threshold_) {
    best_ = validation_loss;
    bad_ = 0;
    return false;
  }
  if (++bad_ > patience_) {
    learning_rate *= factor_;
    bad_ = 0;
    return true;
  }
  return false;
}

} // namespace wetpred::nn
