#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pipeline_detail.hpp"
#include "wetpred/ensemble.hpp"
#include "wetpred/error.hpp"
#include "wetpred/parallel.hpp"
#include "wetpred/rng.hpp"

namespace wetpred::ensemble {

namespace detail {

std::vector<std::string> select_columns(const Dataset& data, std::span<const std::size_t> rows,
                                        const PipelineConfig& cfg, std::uint64_t seed,
                                        std::size_t jobs, forest::ImportanceReport* report) {
  if (cfg.select_k == 0) return data.columns;
  const Matrix x = take_rows(data.features, rows);
  const Vector y = take_rows(data.target, rows);
  auto rep = forest::select_features(x, y, data.columns, cfg.select_k, cfg.selection_runs,
                                     cfg.selection_forest, seed, jobs);
  auto names = rep.selected_names();
  if (report) *report = std::move(rep);
  return names;
}

PreparedRows prepare_model_space(const Dataset& data, std::span<const std::size_t> train_rows,
                                 std::span<const std::size_t> test_rows,
                                 const std::vector<std::string>& selected,
                                 double validation_fraction, std::uint64_t seed) {
  const std::size_t n = train_rows.size();
  if (n < 3) throw TooFewSamples("need at least 3 training rows, got " + std::to_string(n));
  if (!(validation_fraction > 0 && validation_fraction < 1))
    throw DataError("validation fraction must lie in (0, 1)");

  PreparedRows out;
  const auto cols = data.column_indices(selected);
  const Matrix train_raw = take_cols(take_rows(data.features, train_rows), cols);
  out.transform = preprocess::fit_transformer(train_raw, selected);
  const Matrix train_z = preprocess::apply_transformer(out.transform, train_raw, selected);
  out.test_x = preprocess::apply_transformer(
      out.transform, take_cols(take_rows(data.features, test_rows), cols), selected);
  const Vector train_y = take_rows(data.target, train_rows);
  out.all_train = {train_z, train_y};

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n))), 1,
      n - 2);
  std::vector<std::size_t> val_pos(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> fit_pos(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_pos.begin(), val_pos.end());
  std::sort(fit_pos.begin(), fit_pos.end());
  for (auto p : fit_pos) out.fit_rows.push_back(train_rows[p]);
  for (auto p : val_pos) out.val_rows.push_back(train_rows[p]);
  out.fit = {take_rows(train_z, fit_pos), take_rows(train_y, fit_pos)};
  out.val = {take_rows(train_z, val_pos), take_rows(train_y, val_pos)};
  return out;
}

} // namespace detail

std::string_view model_name(ModelKind kind) {
  switch (kind) {
  case ModelKind::Ensemble: return "ensemble";
  case ModelKind::SingleNetwork: return "single_nn";
  case ModelKind::RandomForest: return "random_forest";
  case ModelKind::TrainMean: return "train_mean";
  }
  return "?";
}

std::vector<Fold> make_folds(std::size_t n, std::size_t folds, std::size_t repeats,
                             std::uint64_t seed) {
  if (folds < 2) throw DataError("cross-validation needs at least 2 folds");
  if (repeats < 1) throw DataError("cross-validation needs at least 1 repeat");
  if (n < folds)
    throw TooFewSamples(std::to_string(n) + " samples cannot fill " + std::to_string(folds) +
                        " folds");
  std::vector<Fold> out;
  out.reserve(folds * repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(derive_seed(seed, r));
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t f = 0; f < folds; ++f) {
      const std::size_t begin = f * n / folds;
      const std::size_t end = (f + 1) * n / folds;
      Fold fold;
      fold.repeat = r;
      fold.fold = f;
      fold.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(begin),
                       perm.begin() + static_cast<std::ptrdiff_t>(end));
      fold.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(begin));
      fold.train.insert(fold.train.end(), perm.begin() + static_cast<std::ptrdiff_t>(end),
                        perm.end());
      std::sort(fold.test.begin(), fold.test.end());
      std::sort(fold.train.begin(), fold.train.end());
      out.push_back(std::move(fold));
    }
  }
  return out;
}

std::uint64_t fold_assignment_hash(std::span<const Fold> folds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto eat = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& f : folds) {
    eat(f.repeat);
    eat(f.fold);
    eat(f.test.size());
    for (auto i : f.test) eat(i);
  }
  return h;
}

namespace {

void finish_fold(FoldResult& r, const Vector& y_test) {
  const auto y = as_span(y_test);
  const auto p = as_span(r.predictions);
  r.rmse = rmse(y, p);
  try {
    r.r2 = ensemble::r2(y, p);
  } catch (const ConstantTarget&) {
    r.r2 = std::numeric_limits<double>::quiet_NaN();
  }
}

void aggregate(CVReport& rep) {
  auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = std::numeric_limits<double>::quiet_NaN();
    sd = std::numeric_limits<double>::quiet_NaN();
    if (v.empty()) return;
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) {
      sd = 0.0;
      return;
    }
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  std::vector<double> rm;
  std::vector<double> rr;
  for (const auto& f : rep.folds) {
    rm.push_back(f.rmse);
    if (!std::isnan(f.r2)) rr.push_back(f.r2);
  }
  stats(rm, rep.rmse_mean, rep.rmse_std);
  stats(rr, rep.r2_mean, rep.r2_std);
}

} // namespace

std::vector<CVReport> cross_validate(const Dataset& data, std::span<const ModelKind> models,
                                     const CVConfig& cfg) {
  data.validate();
  if (!data.has_target()) throw MissingTarget("cross-validation needs a target column");
  if (models.empty()) throw DataError("no models to evaluate");
  const auto folds = make_folds(data.rows(), cfg.folds, cfg.repeats, cfg.seed);
  const auto hash = fold_assignment_hash(folds);
  const auto& pipe = cfg.pipeline;

  std::vector<std::string> global_selected;
  if (pipe.global_selection) {
    std::vector<std::size_t> all(data.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    global_selected = detail::select_columns(data, all, pipe,
                                             derive_seed(cfg.seed, detail::kSelectStream),
                                             cfg.jobs, nullptr);
  }

  // results[fold][model]
  std::vector<std::vector<FoldResult>> results(folds.size());
  parallel_for(folds.size(), cfg.jobs, [&](std::size_t k) {
    const Fold& fold = folds[k];
    const auto fold_seed = [&](std::uint64_t stream) {
      return derive_seed(cfg.seed, fold.repeat, fold.fold, stream);
    };
    const auto selected =
        pipe.global_selection
            ? global_selected
            : detail::select_columns(data, fold.train, pipe, fold_seed(detail::kSelectStream), 1,
                                     nullptr);
    const auto prepared =
        detail::prepare_model_space(data, fold.train, fold.test, selected,
                                    pipe.ensemble.train.validation_fraction,
                                    fold_seed(detail::kValidationStream));
    const Vector y_test = take_rows(data.target, fold.test);

    std::vector<std::size_t> touched = prepared.fit_rows;
    touched.insert(touched.end(), prepared.val_rows.begin(), prepared.val_rows.end());
    std::sort(touched.begin(), touched.end());
    std::vector<std::size_t> overlap;
    std::set_intersection(touched.begin(), touched.end(), fold.test.begin(), fold.test.end(),
                          std::back_inserter(overlap));
    if (!overlap.empty()) throw Error("held-out rows leaked into fitting");

    for (const ModelKind kind : models) {
      FoldResult r;
      r.repeat = fold.repeat;
      r.fold = fold.fold;
      r.train_indices = touched;
      r.test_indices = fold.test;
      r.selected = selected;
      switch (kind) {
      case ModelKind::Ensemble: {
        auto ens_cfg = pipe.ensemble;
        ens_cfg.master_seed = fold_seed(detail::kModelStream);
        const auto ens = train_ensemble(prepared.fit, prepared.val, ens_cfg);
        r.predictions = predict_model_space(ens, prepared.test_x);
        for (const auto& mp : member_predictions(ens, prepared.test_x))
          r.member_mse.push_back(mse(as_span(y_test), as_span(mp)));
        r.ensemble_mse = mse(as_span(y_test), as_span(r.predictions));
        break;
      }
      case ModelKind::SingleNetwork: {
        auto single = pipe.ensemble;
        single.members = 1;
        single.master_seed = fold_seed(detail::kSingleStream);
        const auto ens = train_ensemble(prepared.fit, prepared.val, single);
        r.predictions = predict_model_space(ens, prepared.test_x);
        break;
      }
      case ModelKind::RandomForest: {
        const auto f = forest::fit_forest(prepared.all_train.x, prepared.all_train.y,
                                          pipe.baseline_forest, fold_seed(detail::kForestStream));
        r.predictions = forest::predict_forest(f, prepared.test_x);
        break;
      }
      case ModelKind::TrainMean: {
        const double m = prepared.all_train.y.mean();
        r.predictions = Vector::Constant(static_cast<Eigen::Index>(fold.test.size()), m);
        break;
      }
      }
      finish_fold(r, y_test);
      results[k].push_back(std::move(r));
    }
  });

  std::vector<CVReport> reports(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    reports[m].model = models[m];
    reports[m].assignment_hash = hash;
    for (auto& per_fold : results) reports[m].folds.push_back(std::move(per_fold[m]));
    aggregate(reports[m]);
  }
  return reports;
}

CVReport cross_validate(const Dataset& data, ModelKind model, const CVConfig& cfg) {
  const ModelKind models[] = {model};
  return std::move(cross_validate(data, models, cfg).front());
}

std::vector<CVReport> compare_models(const Dataset& data, const CVConfig& cfg) {
  const ModelKind models[] = {ModelKind::Ensemble, ModelKind::SingleNetwork,
                              ModelKind::RandomForest};
  return cross_validate(data, models, cfg);
}

} // namespace wetpred::ensemble
