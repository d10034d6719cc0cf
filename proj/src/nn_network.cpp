#include <cmath>

#include "wetpred/error.hpp"
#include "wetpred/nn.hpp"

namespace wetpred::nn {

namespace {

template <typename T>
std::span<T> view_of(T* data, Eigen::Index size) {
  return {data, static_cast<std::size_t>(size)};
}

} // namespace

std::vector<std::span<double>> Parameters::views() {
  std::vector<std::span<double>> out;
  out.reserve(blocks.size() * 4 + 2);
  for (auto& b : blocks) {
    out.push_back(view_of(b.weight.data(), b.weight.size()));
    out.push_back(view_of(b.bias.data(), b.bias.size()));
    out.push_back(view_of(b.gamma.data(), b.gamma.size()));
    out.push_back(view_of(b.beta.data(), b.beta.size()));
  }
  out.push_back(view_of(head_weight.data(), head_weight.size()));
  out.push_back(view_of(head_bias.data(), head_bias.size()));
  return out;
}

std::vector<std::span<const double>> Parameters::views() const {
  std::vector<std::span<const double>> out;
  out.reserve(blocks.size() * 4 + 2);
  for (const auto& b : blocks) {
    out.push_back(view_of(b.weight.data(), b.weight.size()));
    out.push_back(view_of(b.bias.data(), b.bias.size()));
    out.push_back(view_of(b.gamma.data(), b.gamma.size()));
    out.push_back(view_of(b.beta.data(), b.beta.size()));
  }
  out.push_back(view_of(head_weight.data(), head_weight.size()));
  out.push_back(view_of(head_bias.data(), head_bias.size()));
  return out;
}

Parameters Parameters::zeros_like() const {
  Parameters z;
  z.blocks.reserve(blocks.size());
  for (const auto& b : blocks) {
    z.blocks.push_back({Matrix::Zero(b.weight.rows(), b.weight.cols()),
                        RowVector::Zero(b.bias.size()), RowVector::Zero(b.gamma.size()),
                        RowVector::Zero(b.beta.size())});
  }
  z.head_weight = Vector::Zero(head_weight.size());
  z.head_bias = RowVector::Zero(head_bias.size());
  return z;
}

Network init_network(const Architecture& arch, Rng& rng) {
  if (arch.input_width == 0) throw DataError("architecture needs a positive input width");
  if (arch.hidden.empty()) throw DataError("architecture needs at least one hidden layer");
  if (!(arch.dropout >= 0 && arch.dropout < 1)) throw DataError("dropout must lie in [0, 1)");
  if (!(arch.leaky_slope > 0)) throw DataError("leaky slope must be positive");

  Network net;
  net.arch = arch;
  std::size_t fan_in = arch.input_width;
  for (std::size_t l = 0; l < arch.hidden.size(); ++l) {
    const std::size_t width = arch.hidden[l];
    if (width == 0) throw DataError("hidden widths must be positive");
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    BlockParams b;
    b.weight.resize(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(width));
    for (Eigen::Index i = 0; i < b.weight.size(); ++i) b.weight.data()[i] = normal(rng);
    b.bias = RowVector::Zero(static_cast<Eigen::Index>(width));
    b.gamma = RowVector::Ones(static_cast<Eigen::Index>(width));
    b.beta = RowVector::Zero(static_cast<Eigen::Index>(width));
    net.params.blocks.push_back(std::move(b));
    net.stats.push_back({RowVector::Zero(static_cast<Eigen::Index>(width)),
                         RowVector::Ones(static_cast<Eigen::Index>(width))});
    net.skip.push_back(arch.residual && l > 0 && arch.hidden[l - 1] == width);
    fan_in = width;
  }
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  net.params.head_weight.resize(static_cast<Eigen::Index>(fan_in));
  for (Eigen::Index i = 0; i < net.params.head_weight.size(); ++i)
    net.params.head_weight(i) = normal(rng);
  net.params.head_bias = RowVector::Zero(1);
  return net;
}

double leaky_relu(double x, double slope) { return x >= 0 ? x : slope * x; }

double leaky_relu_derivative(double x, double slope) { return x >= 0 ? 1.0 : slope; }

BatchNormOutput batch_norm_forward(const Matrix& z, const RowVector& gamma, const RowVector& beta,
                                   Mode mode, const RunningStats& stats) {
  BatchNormOutput bn;
  if (mode == Mode::Train) {
    if (z.rows() < 2)
      throw BatchTooSmall("batch norm in Train mode needs at least 2 rows, got " +
                          std::to_string(z.rows()));
    bn.mean = z.colwise().mean();
    bn.var = (z.rowwise() - bn.mean).array().square().colwise().mean().matrix();
  } else {
    bn.mean = stats.mean;
    bn.var = stats.var;
  }
  bn.inv_std = (bn.var.array() + kBatchNormEpsilon).rsqrt().matrix();
  bn.normalized = ((z.rowwise() - bn.mean).array().rowwise() * bn.inv_std.array()).matrix();
  bn.output = ((bn.normalized.array().rowwise() * gamma.array()).rowwise() + beta.array()).matrix();
  return bn;
}

void update_running_stats(RunningStats& stats, const BatchNormOutput& bn, std::size_t batch,
                          double momentum) {
  const double unbias = static_cast<double>(batch) / static_cast<double>(batch - 1);
  stats.mean = momentum * stats.mean + (1.0 - momentum) * bn.mean;
  stats.var = momentum * stats.var + (1.0 - momentum) * unbias * bn.var;
}

Matrix batch_norm_backward(const Matrix& grad_out, const BatchNormOutput& bn,
                           const RowVector& gamma, RowVector& grad_gamma, RowVector& grad_beta) {
  const double n = static_cast<double>(grad_out.rows());
  grad_gamma += grad_out.cwiseProduct(bn.normalized).colwise().sum();
  grad_beta += grad_out.colwise().sum();
  const Matrix dxhat = (grad_out.array().rowwise() * gamma.array()).matrix();
  const RowVector sum_d = dxhat.colwise().sum();
  const RowVector sum_dx = dxhat.cwiseProduct(bn.normalized).colwise().sum();
  Matrix dz = n * dxhat;
  dz.rowwise() -= sum_d;
  dz -= (bn.normalized.array().rowwise() * sum_dx.array()).matrix();
  dz = (dz.array().rowwise() * (bn.inv_std.array() / n)).matrix();
  return dz;
}

ForwardCache forward(const Network& net, const Matrix& batch, Mode mode, Rng* dropout_rng) {
  if (static_cast<std::size_t>(batch.cols()) != net.arch.input_width)
    throw DimensionMismatch("network expects " + std::to_string(net.arch.input_width) +
                            " inputs, got " + std::to_string(batch.cols()));
  const bool use_dropout = mode == Mode::Train && net.arch.dropout > 0;
  if (use_dropout && dropout_rng == nullptr)
    throw Error("Train-mode forward with dropout needs a random stream");

  ForwardCache cache;
  cache.mode = mode;
  cache.revision = net.revision;
  cache.blocks.reserve(net.params.blocks.size());
  const double slope = net.arch.leaky_slope;
  const double keep_scale = use_dropout ? 1.0 / (1.0 - net.arch.dropout) : 1.0;

  const Matrix* h = &batch;
  for (std::size_t l = 0; l < net.params.blocks.size(); ++l) {
    const auto& p = net.params.blocks[l];
    BlockCache bc;
    bc.input = *h;
    Matrix z = bc.input * p.weight;
    z.rowwise() += p.bias;
    bc.bn = batch_norm_forward(z, p.gamma, p.beta, mode, net.stats[l]);
    Matrix a = bc.bn.output.unaryExpr([slope](double v) { return leaky_relu(v, slope); });
    if (use_dropout) {
      std::bernoulli_distribution keep(1.0 - net.arch.dropout);
      bc.dropout_mask.resize(a.rows(), a.cols());
      for (Eigen::Index i = 0; i < a.size(); ++i)
        bc.dropout_mask.data()[i] = keep(*dropout_rng) ? keep_scale : 0.0;
      a = a.cwiseProduct(bc.dropout_mask);
    }
    if (net.skip[l]) a += bc.input;
    bc.output = std::move(a);
    cache.blocks.push_back(std::move(bc));
    h = &cache.blocks.back().output;
  }
  cache.predictions = (*h) * net.params.head_weight;
  cache.predictions.array() += net.params.head_bias(0);
  return cache;
}

Vector predict(const Network& net, const Matrix& batch) {
  return forward(net, batch, Mode::Eval).predictions;
}

void update_running_stats(Network& net, const ForwardCache& cache, double momentum) {
  if (cache.mode != Mode::Train) return;
  for (std::size_t l = 0; l < cache.blocks.size(); ++l)
    update_running_stats(net.stats[l], cache.blocks[l].bn,
                         static_cast<std::size_t>(cache.blocks[l].input.rows()), momentum);
}

double huber(double error, double delta) {
  const double a = std::abs(error);
  return a <= delta ? 0.5 * error * error : delta * (a - 0.5 * delta);
}

LossResult composite_loss(const Vector& pred, const Vector& target, double alpha, double delta) {
  if (pred.size() == 0) throw EmptyBatch("loss over an empty batch");
  if (pred.size() != target.size())
    throw DimensionMismatch("prediction and target lengths differ");
  if (!(alpha >= 0 && alpha <= 1)) throw DataError("loss mix alpha must lie in [0, 1]");
  if (!(delta > 0)) throw DataError("huber delta must be positive");

  const double n = static_cast<double>(pred.size());
  LossResult r;
  r.gradient.resize(pred.size());
  double mse = 0;
  double hub = 0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double e = pred(i) - target(i);
    mse += e * e;
    hub += huber(e, delta);
    const double dh = std::abs(e) <= delta ? e : std::copysign(delta, e);
    r.gradient(i) = (alpha * 2.0 * e + (1.0 - alpha) * dh) / n;
  }
  r.value = alpha * mse / n + (1.0 - alpha) * hub / n;
  return r;
}

Parameters backward(const Network& net, const ForwardCache& cache, const Vector& loss_grad) {
  if (cache.revision != net.revision)
    throw StaleCache("forward cache predates the latest parameter update");
  if (cache.blocks.size() != net.params.blocks.size() ||
      loss_grad.size() != cache.predictions.size())
    throw StaleCache("forward cache does not match this network");

  Parameters g = net.params.zeros_like();
  const Matrix& last = cache.blocks.back().output;
  g.head_weight = last.transpose() * loss_grad;
  g.head_bias(0) = loss_grad.sum();
  Matrix grad_h = loss_grad * net.params.head_weight.transpose();

  const double slope = net.arch.leaky_slope;
  for (std::size_t l = cache.blocks.size(); l-- > 0;) {
    const auto& bc = cache.blocks[l];
    const auto& p = net.params.blocks[l];
    auto& gp = g.blocks[l];
    Matrix grad_act = grad_h;
    if (bc.dropout_mask.size() > 0) grad_act = grad_act.cwiseProduct(bc.dropout_mask);
    const Matrix grad_bn = grad_act.cwiseProduct(
        bc.bn.output.unaryExpr([slope](double v) { return leaky_relu_derivative(v, slope); }));
    Matrix grad_z;
    if (cache.mode == Mode::Train) {
      grad_z = batch_norm_backward(grad_bn, bc.bn, p.gamma, gp.gamma, gp.beta);
    } else {
      gp.gamma += grad_bn.cwiseProduct(bc.bn.normalized).colwise().sum();
      gp.beta += grad_bn.colwise().sum();
      grad_z = (grad_bn.array().rowwise() * (p.gamma.array() * bc.bn.inv_std.array())).matrix();
    }
    gp.weight = bc.input.transpose() * grad_z;
    gp.bias = grad_z.colwise().sum();
    Matrix grad_in = grad_z * p.weight.transpose();
    if (net.skip[l]) grad_in += grad_h;
    grad_h = std::move(grad_in);
  }
  return g;
}

} // namespace wetpred::nn
