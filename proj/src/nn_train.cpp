#include <algorithm>
#include <limits>
#include <numeric>
#include <utility>

#include "wetpred/error.hpp"
#include "wetpred/nn.hpp"

namespace wetpred::nn {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kDropoutStream = 3;

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t size) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t start = 0; start < n; start += size)
    ranges.emplace_back(start, std::min(n, start + size));
  if (ranges.size() > 1 && ranges.back().second - ranges.back().first == 1) {
    ranges.pop_back();
    ranges.back().second = n;
  }
  return ranges;
}

} // namespace

TrainedModel train_model(const Split& train, const Split& val, const Architecture& arch,
                         const TrainConfig& config, std::uint64_t seed) {
  if (val.x.rows() == 0) throw NoValidationData("validation split is empty");
  if (train.x.rows() != train.y.size() || val.x.rows() != val.y.size())
    throw DimensionMismatch("feature rows and targets differ in count");
  if (train.x.rows() < 2)
    throw BatchTooSmall("training needs at least 2 rows for batch statistics");
  if (config.batch_size < 2) throw BatchTooSmall("batch size must be at least 2");
  if (config.max_epochs == 0) throw DataError("max_epochs must be positive");

  Rng init_rng(derive_seed(seed, kInitStream));
  Rng shuffle_rng(derive_seed(seed, kShuffleStream));
  Rng dropout_rng(derive_seed(seed, kDropoutStream));

  Architecture a = arch;
  a.input_width = static_cast<std::size_t>(train.x.cols());
  Network net = init_network(a, init_rng);

  AdamWConfig opt;
  opt.learning_rate = config.learning_rate;
  opt.beta1 = config.beta1;
  opt.beta2 = config.beta2;
  opt.epsilon = config.epsilon;
  opt.weight_decay = config.weight_decay;
  auto state = make_optimizer_state(net.params.views(), opt);
  PlateauScheduler scheduler(config.scheduler_patience, config.scheduler_factor);

  const auto n = static_cast<std::size_t>(train.x.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto ranges = batch_ranges(n, config.batch_size);

  TrainedModel result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  result.net = net;
  std::size_t stagnant = 0;
  Matrix xb;
  Vector yb;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0;
    for (const auto& [begin, end] : ranges) {
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      xb = take_rows(train.x, rows);
      yb = take_rows(train.y, rows);
      const auto cache = forward(net, xb, Mode::Train, &dropout_rng);
      const auto loss = composite_loss(cache.predictions, yb, config.loss_alpha, config.huber_delta);
      epoch_loss += loss.value * static_cast<double>(end - begin);
      auto grads = backward(net, cache, loss.gradient);
      clip_gradients(grads, config.clip_norm);
      const auto gviews = std::as_const(grads).views();
      adamw_step(net.params.views(), gviews, state);
      ++net.revision;
      update_running_stats(net, cache, config.bn_momentum);
    }

    const double val_loss =
        composite_loss(predict(net, val.x), val.y, config.loss_alpha, config.huber_delta).value;
    result.history.train_loss.push_back(epoch_loss / static_cast<double>(n));
    result.history.val_loss.push_back(val_loss);
    result.history.learning_rate.push_back(state.config.learning_rate);

    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.net = net;
      stagnant = 0;
    } else {
      ++stagnant;
    }
    scheduler.step(val_loss, state.config.learning_rate);
    if (stagnant >= config.early_stop_patience) break;
  }
  return result;
}

} // namespace wetpred::nn
