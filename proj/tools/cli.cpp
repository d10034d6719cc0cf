#include "cli.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "settings.hpp"
#include "wetpred/error.hpp"
#include "wetpred/io.hpp"
#include "wetpred/parallel.hpp"

namespace wetpred::cli {

namespace {

namespace fs = std::filesystem;

struct Command {
  std::string name;
  CLI::App* app = nullptr;
  std::vector<Group> groups;
  std::string out_dir;
  std::size_t jobs = 1;
  std::string config_path;
  std::vector<std::string> inputs;
  std::map<std::string, std::string> slots;     // raw CLI values per key
  std::map<std::string, bool> flags;           // boolean keys
  std::map<std::string, CLI::Option*> options; // to tell set from unset
};

struct Context {
  Command& cmd;
  Settings settings;
  std::ostream& out;
  std::ostream& err;
  std::vector<std::pair<std::string, std::string>> input_digests;
  std::vector<std::string> outputs;

  fs::path dir() const { return cmd.out_dir; }

  std::string read_input(const std::string& path) {
    auto bytes = io::read_file(path);
    input_digests.emplace_back(path, io::hex64(io::fnv1a(bytes)));
    return bytes;
  }

  void write(const std::string& name, const std::string& contents) {
    io::write_file_atomic(dir() / name, contents);
    outputs.push_back(name);
  }

  io::CsvOptions csv(bool require_target) const {
    return {settings.str("target"), settings.str("id"), require_target};
  }
};

void write_manifest(Context& ctx) {
  nlohmann::json config = nlohmann::json::object();
  for (const auto& [k, v] : ctx.settings.values()) config[k] = v;
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& [path, digest] : ctx.input_digests)
    inputs.push_back({{"path", path}, {"fnv1a", digest}});
  auto outputs = ctx.outputs;
  std::sort(outputs.begin(), outputs.end());
  const nlohmann::json manifest{{"tool", "wetpred"},
                                {"version", kToolVersion},
                                {"subcommand", ctx.cmd.name},
                                {"seed", ctx.settings.u64("seed")},
                                {"config", config},
                                {"inputs", inputs},
                                {"outputs", outputs}};
  io::write_file_atomic(ctx.dir() / "manifest.json", manifest.dump(2) + "\n");
}

int cmd_extract(Context& ctx) {
  const auto options = extract_options(ctx.settings);
  const auto bank = ctx.settings.flag("classic_laws") ? texture::classic_laws_bank()
                                                      : texture::default_mask_bank();
  const auto& paths = ctx.cmd.inputs;
  std::vector<std::string> bytes(paths.size());
  std::vector<texture::TextureFeatureVector> features(paths.size());
  std::vector<std::string> failures(paths.size());
  std::vector<int> codes(paths.size(), kOk);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    try {
      bytes[i] = ctx.read_input(paths[i]);
    } catch (const FileNotReadable&) {
      failures[i] = "cannot read file";
      codes[i] = kUsage;
    }
  }
  parallel_for(paths.size(), ctx.cmd.jobs, [&](std::size_t i) {
    if (codes[i] != kOk) return;
    try {
      features[i] = texture::extract_all(io::parse_pgm(bytes[i]), bank, options);
    } catch (const DataError& e) {
      failures[i] = e.what();
      codes[i] = kData;
    }
  });
  bool failed = false;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (codes[i] == kOk) continue;
    ctx.err << "error: " << paths[i] << ": " << failures[i] << '\n';
    failed = true;
  }
  if (failed) {
    // Unreadable files take precedence over undecodable ones.
    const bool unreadable = std::find(codes.begin(), codes.end(), kUsage) != codes.end();
    return unreadable ? kUsage : kData;
  }

  Dataset data;
  data.id_name = ctx.settings.str("id");
  data.columns = features.front().column_names();
  data.features.resize(static_cast<Eigen::Index>(paths.size()),
                       static_cast<Eigen::Index>(data.columns.size()));
  for (std::size_t i = 0; i < paths.size(); ++i) {
    data.ids.push_back(fs::path(paths[i]).filename().string());
    const auto values = features[i].values();
    for (std::size_t j = 0; j < values.size(); ++j)
      data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[j];
  }
  ctx.write("features.csv", io::format_csv(data));
  ctx.out << "extracted " << paths.size() << " image(s), " << data.columns.size()
          << " texture columns\n";
  return kOk;
}

Dataset load_dataset(Context& ctx, const std::string& path, bool require_target) {
  return io::parse_csv(ctx.read_input(path), ctx.csv(require_target));
}

int cmd_select(Context& ctx) {
  const auto data = load_dataset(ctx, ctx.cmd.inputs.at(0), true);
  const auto cfg = pipeline_config(ctx.settings);
  const double threshold = ctx.settings.real("threshold");
  const auto seed = ctx.settings.u64("seed");
  const auto report =
      threshold > 0
          ? forest::select_features_by_threshold(data.features, data.target, data.columns,
                                                 threshold, cfg.selection_runs,
                                                 cfg.selection_forest, seed, ctx.cmd.jobs)
          : forest::select_features(data.features, data.target, data.columns,
                                    cfg.select_k == 0 ? data.columns.size() : cfg.select_k,
                                    cfg.selection_runs, cfg.selection_forest, seed, ctx.cmd.jobs);
  ctx.write("importance.csv", io::format_importance_csv(report));
  ctx.write("importance_chart.dat", io::format_importance_chart(report));
  ctx.write("correlation.csv",
            io::format_correlation_csv(forest::correlation_matrix(data.features), data.columns));
  if (report.degenerate) ctx.err << "warning: a forest made no splits; importances are zero\n";
  ctx.out << "selected " << report.selected.size() << " of " << data.columns.size()
          << " features:";
  for (const auto& n : report.selected_names()) ctx.out << ' ' << n;
  ctx.out << '\n';
  return kOk;
}

int cmd_train(Context& ctx) {
  const auto data = load_dataset(ctx, ctx.cmd.inputs.at(0), true);
  const auto cfg = pipeline_config(ctx.settings);
  forest::ImportanceReport report;
  io::ModelArtifact artifact;
  artifact.model = ensemble::fit_pipeline(data, cfg, ctx.settings.u64("seed"), ctx.cmd.jobs, &report);
  artifact.config_digest = io::config_digest(cfg);
  ctx.write("model.json", io::serialize_model(artifact));
  ctx.write("training_report.csv", io::format_training_report(artifact.model));
  if (!report.names.empty()) {
    ctx.write("importance.csv", io::format_importance_csv(report));
    ctx.write("importance_chart.dat", io::format_importance_chart(report));
  }
  ctx.out << "trained " << artifact.model.members.size() << " member(s) on " << data.rows()
          << " rows, " << artifact.model.selected_features.size() << " features\n";
  for (std::size_t m = 0; m < artifact.model.members.size(); ++m)
    ctx.out << "  member " << m << ": best epoch " << artifact.model.members[m].best_epoch
            << ", validation loss " << io::format_double(artifact.model.members[m].best_val_loss)
            << '\n';
  return kOk;
}

int cmd_predict(Context& ctx) {
  const auto artifact = io::parse_model(ctx.read_input(ctx.cmd.inputs.at(0)));
  const auto data = load_dataset(ctx, ctx.cmd.inputs.at(1), false);
  const Vector preds = ensemble::predict(artifact.model, data);
  ctx.write("predictions.csv", io::format_predictions(data, preds));
  if (const auto outside = ensemble::count_outside_physical_range(preds))
    ctx.err << "warning: " << outside << " prediction(s) outside [0, 180] degrees\n";
  ctx.out << "predicted " << data.rows() << " row(s)";
  if (data.has_target())
    ctx.out << ", rmse " << io::format_double(ensemble::rmse(as_span(data.target), as_span(preds)));
  ctx.out << '\n';
  return kOk;
}

int cmd_cv(Context& ctx) {
  const auto data = load_dataset(ctx, ctx.cmd.inputs.at(0), true);
  ensemble::CVConfig cfg;
  cfg.folds = ctx.settings.size("folds");
  cfg.repeats = ctx.settings.size("repeats");
  cfg.seed = ctx.settings.u64("seed");
  cfg.jobs = ctx.cmd.jobs;
  cfg.pipeline = pipeline_config(ctx.settings);
  std::vector<ensemble::ModelKind> models{ensemble::ModelKind::Ensemble};
  if (ctx.settings.flag("compare"))
    models = {ensemble::ModelKind::Ensemble, ensemble::ModelKind::SingleNetwork,
              ensemble::ModelKind::RandomForest};
  const auto reports = ensemble::cross_validate(data, models, cfg);
  ctx.write("cv_folds.csv", io::format_cv_folds(reports));
  ctx.write("cv_summary.csv", io::format_cv_summary(reports));
  ctx.write("cv_comparison.dat", io::format_cv_chart(reports));
  for (const auto& r : reports)
    ctx.out << ensemble::model_name(r.model) << ": rmse " << io::format_double(r.rmse_mean)
            << " +/- " << io::format_double(r.rmse_std) << ", r2 " << io::format_double(r.r2_mean)
            << " +/- " << io::format_double(r.r2_std) << '\n';
  return kOk;
}

int cmd_synth(Context& ctx) {
  auto data = io::generate_synthetic(ctx.settings.size("n"), ctx.settings.real("noise"),
                                     ctx.settings.u64("seed"));
  data.target_name = ctx.settings.str("target");
  data.id_name = ctx.settings.str("id");
  ctx.write("synthetic.csv", io::format_csv(data));
  ctx.out << "wrote " << data.rows() << " synthetic rows\n";
  return kOk;
}

int dispatch(Context& ctx) {
  const auto& n = ctx.cmd.name;
  if (n == "extract") return cmd_extract(ctx);
  if (n == "select") return cmd_select(ctx);
  if (n == "train") return cmd_train(ctx);
  if (n == "predict") return cmd_predict(ctx);
  if (n == "cv") return cmd_cv(ctx);
  return cmd_synth(ctx);
}

Command& add_command(CLI::App& app, std::vector<std::unique_ptr<Command>>& cmds,
                     const std::string& name, const std::string& help, std::vector<Group> groups) {
  auto cmd = std::make_unique<Command>();
  cmd->name = name;
  cmd->groups = std::move(groups);
  cmd->groups.insert(cmd->groups.begin(), Group::General);
  auto* sub = app.add_subcommand(name, help);
  cmd->app = sub;
  sub->add_option("--out", cmd->out_dir, "output directory")->required();
  sub->add_option("--jobs", cmd->jobs, "worker threads (results do not depend on it)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--config", cmd->config_path, "key = value configuration file");
  for (const auto& key : keys()) {
    if (std::find(cmd->groups.begin(), cmd->groups.end(), key.group) == cmd->groups.end()) continue;
    auto& slot = cmd->slots[key.name];
    cmd->flags[key.name] = false;
    const std::string desc = key.help + " (default: " +
                             (key.default_value.empty() ? "none" : key.default_value) + ")";
    std::string dashed = key.name;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    std::string names = "--" + key.name;
    if (dashed != key.name) names += ",--" + dashed;
    cmd->options[key.name] = key.boolean ? sub->add_flag(names, cmd->flags[key.name], desc)
                                         : sub->add_option(names, slot, desc);
  }
  cmds.push_back(std::move(cmd));
  return *cmds.back();
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contact-angle prediction from surface texture and chemistry features", "wetpred"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  std::vector<std::unique_ptr<Command>> cmds;
  using G = Group;
  add_command(app, cmds, "extract", "Laws texture features of graymap images",
              {G::Data, G::Extract})
      .app->add_option("images", cmds.back()->inputs, "PGM images")->required();
  add_command(app, cmds, "select", "random-forest feature importance and selection",
              {G::Data, G::Selection})
      .app->add_option("dataset", cmds.back()->inputs, "CSV dataset")->required()->expected(1);
  add_command(app, cmds, "train", "fit selection, transform and ensemble; save the model",
              {G::Data, G::Selection, G::Model})
      .app->add_option("dataset", cmds.back()->inputs, "CSV dataset")->required()->expected(1);
  add_command(app, cmds, "predict", "predict contact angles with a saved model", {G::Data})
      .app->add_option("inputs", cmds.back()->inputs, "model artifact, then CSV dataset")
      ->required()
      ->expected(2);
  add_command(app, cmds, "cv", "repeated k-fold cross-validation",
              {G::Data, G::Selection, G::Model, G::Baseline, G::CV})
      .app->add_option("dataset", cmds.back()->inputs, "CSV dataset")->required()->expected(1);
  add_command(app, cmds, "synth", "generate a synthetic surface dataset", {G::Data, G::Synth});

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto used = app.get_subcommands();
    err << (used.empty() ? app.help() : used.front()->help());
    return kUsage;
  }

  Command* cmd = nullptr;
  for (auto& c : cmds)
    if (c->app->parsed()) cmd = c.get();

  try {
    std::map<std::string, std::string> file_values;
    if (!cmd->config_path.empty()) file_values = parse_config(io::read_file(cmd->config_path));
    std::map<std::string, std::string> cli_values;
    for (const auto& [key, opt] : cmd->options)
      if (opt->count() > 0)
        cli_values[key] = find_key(key)->boolean ? (cmd->flags[key] ? "true" : "false")
                                                 : cmd->slots[key];
    Context ctx{*cmd, resolve(cmd->groups, file_values, cli_values), out, err, {}, {}};
    ctx.settings.u64("seed");
    fs::create_directories(cmd->out_dir);
    const int code = dispatch(ctx);
    if (code == kOk) write_manifest(ctx);
    return code;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << cmd->app->help();
    return kUsage;
  } catch (const FileNotReadable& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const MalformedRow& e) {
    err << "error: " << cmd->inputs.back() << ": " << e.what() << '\n';
    return kData;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

} // namespace wetpred::cli
