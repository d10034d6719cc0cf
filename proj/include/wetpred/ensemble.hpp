#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wetpred/dataset.hpp"
#include "wetpred/forest.hpp"
#include "wetpred/linalg.hpp"
#include "wetpred/nn.hpp"
#include "wetpred/preprocess.hpp"

namespace wetpred::ensemble {

struct EnsembleConfig {
  std::size_t members = 5;
  /// Member i trains at train.learning_rate * lr_spread^(i - (N-1)/2).
  double lr_spread = 1.5;
  /// Scheduler patience per member, cycled. When empty, member i gets
  /// train.scheduler_patience + 2 * (i - (N-1)/2), floored at 1.
  std::vector<std::size_t> patiences;
  nn::Architecture arch;
  nn::TrainConfig train;
  std::uint64_t master_seed = 0;
};

struct MemberConfig {
  nn::TrainConfig train;
  std::uint64_t seed = 0; // derive_seed(master_seed, i)
};

std::vector<MemberConfig> make_member_configs(const EnsembleConfig& cfg);

/// Members operate on transformed, selected features and a z-scored target.
struct Ensemble {
  nn::Architecture arch;
  std::vector<MemberConfig> member_configs;
  std::vector<nn::TrainedModel> members;
  std::vector<std::string> selected_features;
  preprocess::TransformParams transform; // over selected_features, in order
  preprocess::TargetScaler target_scaler;
};

/// Trains every member on `train` (model-space features, targets in degrees)
/// with early stopping on `val`. Selection and transform are left empty for
/// the caller to fill in.
Ensemble train_ensemble(const nn::Split& train, const nn::Split& val, const EnsembleConfig& cfg,
                        std::size_t jobs = 1);

/// Per-member predictions in degrees for model-space inputs.
std::vector<Vector> member_predictions(const Ensemble& ens, const Matrix& model_inputs);

/// Mean of member outputs on the standardized scale, mapped back to degrees.
/// Values outside [0, 180] are returned unclamped.
Vector predict_model_space(const Ensemble& ens, const Matrix& model_inputs);

/// Picks the selected columns by name, applies the stored transform, predicts.
/// Throws SchemaMismatch when a selected column is missing.
Vector predict(const Ensemble& ens, const Dataset& data);

/// Model-space inputs for `data` (selection + transform), as used by predict.
Matrix model_inputs(const Ensemble& ens, const Dataset& data);

std::size_t count_outside_physical_range(const Vector& degrees);

double mse(std::span<const double> y, std::span<const double> yhat);
double rmse(std::span<const double> y, std::span<const double> yhat);
/// 1 - SSE / SST. Throws ConstantTarget when y is constant.
double r2(std::span<const double> y, std::span<const double> yhat);

struct PipelineConfig {
  std::size_t select_k = 20; // 0 keeps every column
  std::size_t selection_runs = 10;
  forest::ForestParams selection_forest;
  /// Select once on the full dataset before the folds instead of per fold.
  bool global_selection = false;
  EnsembleConfig ensemble;
  forest::ForestParams baseline_forest;
};

/// Selection -> transform -> validation carve -> ensemble on every row of
/// `data`. The importance report of the selection step is written to
/// `report` when given.
Ensemble fit_pipeline(const Dataset& data, const PipelineConfig& cfg, std::uint64_t seed,
                      std::size_t jobs = 1, forest::ImportanceReport* report = nullptr);

enum class ModelKind { Ensemble, SingleNetwork, RandomForest, TrainMean };

std::string_view model_name(ModelKind kind);

struct Fold {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per repeat, a seeded shuffle is cut into `folds` contiguous near-equal
/// parts. Depends only on (n, folds, repeats, seed).
std::vector<Fold> make_folds(std::size_t n, std::size_t folds, std::size_t repeats,
                             std::uint64_t seed);

/// FNV-1a over the test index lists of every fold.
std::uint64_t fold_assignment_hash(std::span<const Fold> folds);

struct FoldResult {
  std::size_t repeat = 0;
  std::size_t fold = 0;
  std::vector<std::size_t> train_indices; // every row used for fitting, incl. validation
  std::vector<std::size_t> test_indices;
  std::vector<std::string> selected;
  Vector predictions; // degrees, aligned with test_indices
  double rmse = 0.0;
  double r2 = 0.0; // NaN when the held-out targets are constant
  // Ensemble only.
  double ensemble_mse = 0.0;
  std::vector<double> member_mse;
};

struct CVReport {
  ModelKind model = ModelKind::Ensemble;
  std::vector<FoldResult> folds;
  double rmse_mean = 0.0;
  double rmse_std = 0.0; // sample std over folds
  double r2_mean = 0.0;
  double r2_std = 0.0;
  std::uint64_t assignment_hash = 0;
};

struct CVConfig {
  std::size_t folds = 8;
  std::size_t repeats = 2;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  PipelineConfig pipeline;
};

/// Runs every requested model on identical folds. Per fold, selection and the
/// transform are fitted on the training rows only; the validation rows for
/// early stopping are carved from those training rows too.
std::vector<CVReport> cross_validate(const Dataset& data, std::span<const ModelKind> models,
                                     const CVConfig& cfg);
CVReport cross_validate(const Dataset& data, ModelKind model, const CVConfig& cfg);

/// Ensemble, single network and random forest under one fold assignment.
std::vector<CVReport> compare_models(const Dataset& data, const CVConfig& cfg);

} // namespace wetpred::ensemble
