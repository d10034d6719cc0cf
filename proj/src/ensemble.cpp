#include "wetpred/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "wetpred/error.hpp"
#include "wetpred/parallel.hpp"
#include "wetpred/rng.hpp"
#include "pipeline_detail.hpp"

namespace wetpred::ensemble {

std::vector<MemberConfig> make_member_configs(const EnsembleConfig& cfg) {
  if (cfg.members == 0) throw DataError("ensemble needs at least one member");
  if (!(cfg.lr_spread > 0)) throw DataError("learning-rate spread must be positive");
  const double centre = (static_cast<double>(cfg.members) - 1.0) / 2.0;
  std::vector<MemberConfig> out(cfg.members);
  for (std::size_t i = 0; i < cfg.members; ++i) {
    const double offset = static_cast<double>(i) - centre;
    auto& m = out[i];
    m.train = cfg.train;
    m.train.learning_rate = cfg.train.learning_rate * std::pow(cfg.lr_spread, offset);
    if (cfg.patiences.empty()) {
      const auto p = static_cast<long long>(cfg.train.scheduler_patience) +
                     std::llround(2.0 * offset);
      m.train.scheduler_patience = static_cast<std::size_t>(std::max<long long>(1, p));
    } else {
      m.train.scheduler_patience = cfg.patiences[i % cfg.patiences.size()];
    }
    m.seed = derive_seed(cfg.master_seed, i);
  }
  return out;
}

Ensemble train_ensemble(const nn::Split& train, const nn::Split& val, const EnsembleConfig& cfg,
                        std::size_t jobs) {
  if (train.x.rows() != train.y.size() || val.x.rows() != val.y.size())
    throw DimensionMismatch("feature rows and targets differ in count");
  if (val.x.rows() == 0) throw NoValidationData("validation split is empty");
  Ensemble ens;
  ens.arch = cfg.arch;
  ens.arch.input_width = static_cast<std::size_t>(train.x.cols());
  ens.member_configs = make_member_configs(cfg);
  ens.target_scaler = preprocess::TargetScaler::fit(train.y);
  const nn::Split scaled_train{train.x, ens.target_scaler.apply(train.y)};
  const nn::Split scaled_val{val.x, ens.target_scaler.apply(val.y)};
  ens.members.resize(cfg.members);
  parallel_for(cfg.members, jobs, [&](std::size_t i) {
    ens.members[i] = nn::train_model(scaled_train, scaled_val, ens.arch,
                                     ens.member_configs[i].train, ens.member_configs[i].seed);
  });
  return ens;
}

namespace {

std::vector<Vector> member_outputs_scaled(const Ensemble& ens, const Matrix& model_inputs) {
  if (ens.members.empty()) throw DataError("ensemble has no members");
  if (static_cast<std::size_t>(model_inputs.cols()) != ens.arch.input_width)
    throw SchemaMismatch("ensemble expects " + std::to_string(ens.arch.input_width) +
                         " model inputs, got " + std::to_string(model_inputs.cols()));
  std::vector<Vector> out;
  out.reserve(ens.members.size());
  for (const auto& m : ens.members) out.push_back(nn::predict(m.net, model_inputs));
  return out;
}

} // namespace

std::vector<Vector> member_predictions(const Ensemble& ens, const Matrix& model_inputs) {
  auto outs = member_outputs_scaled(ens, model_inputs);
  for (auto& o : outs) o = ens.target_scaler.inverse(o);
  return outs;
}

Vector predict_model_space(const Ensemble& ens, const Matrix& model_inputs) {
  const auto outs = member_outputs_scaled(ens, model_inputs);
  Vector mean(model_inputs.rows());
  std::vector<double> values(outs.size());
  for (Eigen::Index i = 0; i < model_inputs.rows(); ++i) {
    // Summing in sorted order makes the mean independent of member order.
    for (std::size_t m = 0; m < outs.size(); ++m) values[m] = outs[m](i);
    std::sort(values.begin(), values.end());
    double s = 0;
    for (double v : values) s += v;
    mean(i) = s / static_cast<double>(values.size());
  }
  return ens.target_scaler.inverse(mean);
}

Matrix model_inputs(const Ensemble& ens, const Dataset& data) {
  const auto cols = data.column_indices(ens.selected_features);
  return preprocess::apply_transformer(ens.transform, take_cols(data.features, cols),
                                       ens.selected_features);
}

Vector predict(const Ensemble& ens, const Dataset& data) {
  return predict_model_space(ens, model_inputs(ens, data));
}

std::size_t count_outside_physical_range(const Vector& degrees) {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < degrees.size(); ++i)
    if (degrees(i) < 0.0 || degrees(i) > 180.0) ++n;
  return n;
}

namespace {

void check_pair(std::span<const double> y, std::span<const double> yhat) {
  if (y.empty()) throw EmptyVector("metric over an empty vector");
  if (y.size() != yhat.size()) throw DimensionMismatch("target and prediction lengths differ");
}

} // namespace

double mse(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat);
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
  return std::sqrt(mse(y, yhat));
}

double r2(std::span<const double> y, std::span<const double> yhat) {
  check_pair(y, yhat);
  double mean = 0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double sst = 0;
  double sse = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sst += (y[i] - mean) * (y[i] - mean);
    sse += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  }
  if (!(sst > 0)) throw ConstantTarget("r2 is undefined for a constant target");
  return 1.0 - sse / sst;
}

Ensemble fit_pipeline(const Dataset& data, const PipelineConfig& cfg, std::uint64_t seed,
                      std::size_t jobs, forest::ImportanceReport* report) {
  data.validate();
  if (!data.has_target()) throw MissingTarget("training data has no target column");
  std::vector<std::size_t> rows(data.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const auto selected = detail::select_columns(data, rows, cfg, derive_seed(seed, detail::kSelectStream), jobs, report);
  const auto prepared = detail::prepare_model_space(data, rows, {}, selected, cfg.ensemble.train.validation_fraction,
                                                    derive_seed(seed, detail::kValidationStream));
  auto ens_cfg = cfg.ensemble;
  ens_cfg.master_seed = derive_seed(seed, detail::kModelStream);
  Ensemble ens = train_ensemble(prepared.fit, prepared.val, ens_cfg, jobs);
  ens.selected_features = selected;
  ens.transform = prepared.transform;
  return ens;
}

} // namespace wetpred::ensemble
