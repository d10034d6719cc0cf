#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "wetpred/linalg.hpp"
#include "wetpred/rng.hpp"

namespace wetpred::nn {

enum class Mode { Train, Eval };

struct Architecture {
  std::size_t input_width = 0;
  std::vector<std::size_t> hidden{64, 64, 64};
  double dropout = 0.2;      // in [0, 1)
  double leaky_slope = 0.01; // > 0
  bool residual = true;      // identity skip around equal-width hidden blocks
};

/// Learnable tensors of one hidden block: linear, then batch norm.
struct BlockParams {
  Matrix weight; // in x out
  RowVector bias;
  RowVector gamma;
  RowVector beta;
};

/// Every learnable tensor of a network. Gradients use the same layout.
struct Parameters {
  std::vector<BlockParams> blocks;
  Vector head_weight;  // last hidden width x 1
  RowVector head_bias; // size 1

  /// Flat views in a fixed order: per block weight, bias, gamma, beta; then
  /// head weight and head bias.
  std::vector<std::span<double>> views();
  std::vector<std::span<const double>> views() const;

  Parameters zeros_like() const;
};

struct RunningStats {
  RowVector mean;
  RowVector var;
};

/// Hidden block l computes a = dropout(leaky(bn(h W + b))) and outputs
/// a + h when skip[l] is set, else a. Skips join consecutive hidden blocks
/// of equal width; the block reading the raw input never has one.
struct Network {
  Architecture arch;
  Parameters params;
  std::vector<RunningStats> stats;
  std::vector<bool> skip;
  /// Bumped on every parameter update; caches record it to detect staleness.
  std::uint64_t revision = 0;
};

/// He-normal weights (variance 2 / fan_in), zero biases, gamma 1, beta 0,
/// running mean 0 and variance 1.
Network init_network(const Architecture& arch, Rng& rng);

double leaky_relu(double x, double slope);
/// 1 for x >= 0 (including 0), slope otherwise.
double leaky_relu_derivative(double x, double slope);

constexpr double kBatchNormEpsilon = 1e-5;

struct BatchNormOutput {
  Matrix output;
  Matrix normalized; // (z - mean) * inv_std
  RowVector mean;    // batch mean (Train) or running mean (Eval)
  RowVector var;     // biased batch variance (Train) or running variance (Eval)
  RowVector inv_std;
};

/// Train normalizes with batch statistics (biased variance) and throws
/// BatchTooSmall below 2 rows; Eval uses the running statistics.
BatchNormOutput batch_norm_forward(const Matrix& z, const RowVector& gamma, const RowVector& beta,
                                   Mode mode, const RunningStats& stats);

/// running <- momentum * running + (1 - momentum) * batch, with the unbiased
/// batch variance.
void update_running_stats(RunningStats& stats, const BatchNormOutput& bn, std::size_t batch,
                          double momentum);

/// Gradient w.r.t. z of a Train-mode batch norm, including the path through
/// the batch statistics. Accumulates into grad_gamma and grad_beta.
Matrix batch_norm_backward(const Matrix& grad_out, const BatchNormOutput& bn,
                           const RowVector& gamma, RowVector& grad_gamma, RowVector& grad_beta);

struct BlockCache {
  Matrix input;
  BatchNormOutput bn;
  Matrix dropout_mask; // empty when dropout is inactive; else 0 or 1/(1-p)
  Matrix output;
};

struct ForwardCache {
  Mode mode = Mode::Eval;
  std::uint64_t revision = 0;
  std::vector<BlockCache> blocks;
  Vector predictions;
};

/// Train mode draws dropout masks from `dropout_rng` (required when
/// dropout > 0) and does not touch running statistics; see
/// update_running_stats(Network&, ...).
ForwardCache forward(const Network& net, const Matrix& batch, Mode mode,
                     Rng* dropout_rng = nullptr);

/// Eval-mode forward pass, predictions only.
Vector predict(const Network& net, const Matrix& batch);

void update_running_stats(Network& net, const ForwardCache& cache, double momentum);

struct LossResult {
  double value = 0.0;
  Vector gradient; // d loss / d prediction
};

double huber(double error, double delta);

/// alpha * mean(e^2) + (1 - alpha) * mean(huber_delta(e)), e = pred - target.
LossResult composite_loss(const Vector& pred, const Vector& target, double alpha, double delta);

/// Exact reverse-mode gradients of the loss whose gradient w.r.t. the
/// predictions is `loss_grad`. Throws StaleCache if the network changed since
/// the forward pass.
Parameters backward(const Network& net, const ForwardCache& cache, const Vector& loss_grad);

/// Rescales all gradients by max_norm / norm when the global L2 norm exceeds
/// max_norm. Returns the norm before clipping.
double clip_gradients(std::span<const std::span<double>> grads, double max_norm);
double clip_gradients(Parameters& grads, double max_norm);

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
};

struct OptimizerState {
  AdamWConfig config;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

OptimizerState make_optimizer_state(std::span<const std::span<double>> params,
                                    const AdamWConfig& config);

/// m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;  bias-corrected m^, v^;
/// theta <- theta - lr * (m^ / (sqrt(v^) + eps) + wd * theta).
void adamw_step(std::span<const std::span<double>> params,
                std::span<const std::span<const double>> grads, OptimizerState& state);

/// Reduce-on-plateau. A call improves when loss < best - threshold. After
/// more than `patience` consecutive non-improving calls the learning rate is
/// multiplied by `factor` and the counter restarts.
class PlateauScheduler {
public:
  PlateauScheduler(std::size_t patience, double factor, double threshold = 1e-6);

  /// Returns true when this call reduced the learning rate.
  bool step(double validation_loss, double& learning_rate);

  std::size_t stagnant_calls() const noexcept { return bad_; }

private:
  std::size_t patience_;
  double factor_;
  double threshold_;
  double best_;
  std::size_t bad_ = 0;
};

struct TrainConfig {
  std::size_t max_epochs = 300;
  std::size_t batch_size = 16;
  double loss_alpha = 0.5;
  double huber_delta = 1.0;
  double clip_norm = 1.0;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t scheduler_patience = 10;
  double scheduler_factor = 0.5;
  std::size_t early_stop_patience = 30;
  double validation_fraction = 0.15;
  double bn_momentum = 0.9;
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> learning_rate;
};

struct TrainedModel {
  Network net; // snapshot with the best validation loss
  TrainHistory history;
  std::size_t best_epoch = 0; // 1-based
  double best_val_loss = 0.0;
};

struct Split {
  Matrix x;
  Vector y;
};

/// Seeded mini-batch training: forward(Train) -> composite loss -> backward
/// -> clip -> AdamW, with a plateau scheduler and early stopping driven by the
/// Eval-mode validation loss. Returns the best-validation snapshot.
/// A trailing batch of one row is merged into the previous batch.
TrainedModel train_model(const Split& train, const Split& val, const Architecture& arch,
                         const TrainConfig& config, std::uint64_t seed);

} // namespace wetpred::nn
