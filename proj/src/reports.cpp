#include <cmath>
#include <numeric>
#include <sstream>

#include "wetpred/error.hpp"
#include "wetpred/io.hpp"

namespace wetpred::io {

namespace {

std::string num(double v) { return std::isnan(v) ? "nan" : format_double(v); }

std::vector<std::size_t> ranking(const forest::ImportanceReport& rep) {
  std::vector<std::size_t> order(rep.mean.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rep.mean[a] > rep.mean[b]; });
  return order;
}

} // namespace

std::string format_importance_csv(const forest::ImportanceReport& rep) {
  std::ostringstream out;
  out << "feature,mean,std,rank,selected";
  for (std::size_t r = 0; r < rep.runs; ++r) out << ",run_" << r + 1;
  out << '\n';
  const auto order = ranking(rep);
  std::vector<std::size_t> rank(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i + 1;
  std::vector<bool> selected(rep.names.size(), false);
  for (auto s : rep.selected) selected[s] = true;
  // Rows follow dataset column order.
  for (std::size_t j = 0; j < rep.names.size(); ++j) {
    out << rep.names[j] << ',' << num(rep.mean[j]) << ',' << num(rep.stddev[j]) << ',' << rank[j]
        << ',' << (selected[j] ? 1 : 0);
    for (const auto& run : rep.per_run) out << ',' << num(run[j]);
    out << '\n';
  }
  return out.str();
}

std::string format_importance_chart(const forest::ImportanceReport& rep) {
  std::ostringstream out;
  out << "# rank feature mean std selected\n";
  const auto order = ranking(rep);
  std::vector<bool> selected(rep.names.size(), false);
  for (auto s : rep.selected) selected[s] = true;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto j = order[i];
    out << i + 1 << ' ' << rep.names[j] << ' ' << num(rep.mean[j]) << ' ' << num(rep.stddev[j])
        << ' ' << (selected[j] ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string format_correlation_csv(const Matrix& corr, std::span<const std::string> names) {
  if (corr.rows() != corr.cols() || static_cast<std::size_t>(corr.rows()) != names.size())
    throw DimensionMismatch("correlation matrix does not match column names");
  std::ostringstream out;
  out << "feature";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < corr.rows(); ++i) {
    out << names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < corr.cols(); ++j) out << ',' << num(corr(i, j));
    out << '\n';
  }
  return out.str();
}

std::string format_training_report(const ensemble::Ensemble& ens) {
  std::ostringstream out;
  out << "member,epoch,train_loss,val_loss,learning_rate,best\n";
  for (std::size_t m = 0; m < ens.members.size(); ++m) {
    const auto& tm = ens.members[m];
    const auto& h = tm.history;
    for (std::size_t e = 0; e < h.train_loss.size(); ++e)
      out << m << ',' << e + 1 << ',' << num(h.train_loss[e]) << ',' << num(h.val_loss[e]) << ','
          << num(h.learning_rate[e]) << ',' << (e + 1 == tm.best_epoch ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string format_predictions(const Dataset& data, const Vector& predictions) {
  if (static_cast<std::size_t>(predictions.size()) != data.rows())
    throw DimensionMismatch("prediction count differs from row count");
  std::ostringstream out;
  out << data.id_name << ",prediction";
  if (data.has_target()) out << ',' << data.target_name;
  out << '\n';
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << data.ids[i] << ',' << num(predictions(r));
    if (data.has_target()) out << ',' << num(data.target(r));
    out << '\n';
  }
  return out.str();
}

std::string format_cv_folds(std::span<const ensemble::CVReport> reports) {
  std::ostringstream out;
  out << "model,repeat,fold,n_train,n_test,rmse,r2,ensemble_mse,mean_member_mse,selected\n";
  for (const auto& rep : reports) {
    for (const auto& f : rep.folds) {
      out << ensemble::model_name(rep.model) << ',' << f.repeat + 1 << ',' << f.fold + 1 << ','
          << f.train_indices.size() << ',' << f.test_indices.size() << ',' << num(f.rmse) << ','
          << num(f.r2) << ',';
      if (f.member_mse.empty()) {
        out << ",";
      } else {
        const double mean_member =
            std::accumulate(f.member_mse.begin(), f.member_mse.end(), 0.0) /
            static_cast<double>(f.member_mse.size());
        out << num(f.ensemble_mse) << ',' << num(mean_member);
      }
      out << ',';
      for (std::size_t s = 0; s < f.selected.size(); ++s) out << (s ? ";" : "") << f.selected[s];
      out << '\n';
    }
  }
  return out.str();
}

std::string format_cv_summary(std::span<const ensemble::CVReport> reports) {
  std::ostringstream out;
  out << "model,folds,rmse_mean,rmse_std,r2_mean,r2_std,assignment_hash\n";
  for (const auto& rep : reports)
    out << ensemble::model_name(rep.model) << ',' << rep.folds.size() << ',' << num(rep.rmse_mean)
        << ',' << num(rep.rmse_std) << ',' << num(rep.r2_mean) << ',' << num(rep.r2_std) << ','
        << hex64(rep.assignment_hash) << '\n';
  return out.str();
}

std::string format_cv_chart(std::span<const ensemble::CVReport> reports) {
  std::ostringstream out;
  out << "# index model rmse_mean rmse_std r2_mean r2_std\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& rep = reports[i];
    out << i + 1 << ' ' << ensemble::model_name(rep.model) << ' ' << num(rep.rmse_mean) << ' '
        << num(rep.rmse_std) << ' ' << num(rep.r2_mean) << ' ' << num(rep.r2_std) << '\n';
  }
  return out.str();
}

} // namespace wetpred::io
