#include "settings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

#include "wetpred/io.hpp"

namespace wetpred::cli {

namespace {

std::string num(double v) { return io::format_double(v); }
std::string num(std::size_t v) { return std::to_string(v); }
std::string yes_no(bool v) { return v ? "true" : "false"; }

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<Key> build_keys() {
  const nn::Architecture arch;
  const nn::TrainConfig train;
  const ensemble::EnsembleConfig ens;
  const ensemble::PipelineConfig pipe;
  const forest::ForestParams forest;
  const ensemble::CVConfig cv;
  const texture::ExtractOptions ex;
  using G = Group;
  return {
      {"seed", "0", "master seed", G::General},
      {"target", "contact_angle", "target column name", G::Data},
      {"id", "id", "id column name", G::Data},

      {"classic_laws", "false", "use E5 = [-1 -2 0 2 1] instead of [-1 -2 0 3 1]", G::Extract, true},
      {"border", "reflect", "convolution border: reflect or zero", G::Extract},
      {"half_window", num(static_cast<std::size_t>(ex.half_window)), "energy window half-width", G::Extract},
      {"bins", num(static_cast<std::size_t>(ex.bins)), "Otsu histogram bins", G::Extract},
      {"connectivity", num(static_cast<std::size_t>(ex.connectivity)), "component connectivity: 4 or 8", G::Extract},
      {"normalize_contrast", yes_no(ex.normalize_contrast), "subtract the local mean before filtering", G::Extract, true},
      {"area_scale", num(ex.area_scale), "physical area of one pixel", G::Extract},

      {"k", num(pipe.select_k), "features kept by selection (0 keeps all)", G::Selection},
      {"runs", num(pipe.selection_runs), "forests averaged for importance", G::Selection},
      {"threshold", "0", "select: keep features with mean importance >= threshold (0 uses k)", G::Selection},
      {"selection_trees", num(forest.trees), "trees per selection forest", G::Selection},
      {"selection_max_depth", "0", "selection tree depth limit (0 = none)", G::Selection},
      {"selection_min_leaf", num(forest.min_samples_leaf), "selection minimum samples per leaf", G::Selection},
      {"selection_mtry", "0", "selection features per split (0 = ceil(p/3))", G::Selection},
      {"global_selection", yes_no(pipe.global_selection), "cv: select once on all rows instead of per fold", G::Selection, true},

      {"members", num(ens.members), "ensemble size", G::Model},
      {"lr_spread", num(ens.lr_spread), "learning-rate ratio between neighbouring members", G::Model},
      {"patiences", "", "scheduler patience per member, comma separated", G::Model},
      {"hidden", join(arch.hidden), "hidden widths, comma separated", G::Model},
      {"dropout", num(arch.dropout), "dropout rate", G::Model},
      {"leaky_slope", num(arch.leaky_slope), "leaky ReLU slope", G::Model},
      {"residual", yes_no(arch.residual), "identity skips between equal-width blocks", G::Model, true},
      {"max_epochs", num(train.max_epochs), "epoch limit", G::Model},
      {"batch_size", num(train.batch_size), "mini-batch size", G::Model},
      {"loss_alpha", num(train.loss_alpha), "MSE weight in the composite loss", G::Model},
      {"huber_delta", num(train.huber_delta), "Huber delta (standardized target units)", G::Model},
      {"clip_norm", num(train.clip_norm), "global gradient-norm cap", G::Model},
      {"learning_rate", num(train.learning_rate), "base learning rate", G::Model},
      {"weight_decay", num(train.weight_decay), "AdamW decoupled weight decay", G::Model},
      {"beta1", num(train.beta1), "AdamW beta1", G::Model},
      {"beta2", num(train.beta2), "AdamW beta2", G::Model},
      {"epsilon", num(train.epsilon), "AdamW epsilon", G::Model},
      {"scheduler_patience", num(train.scheduler_patience), "plateau scheduler patience", G::Model},
      {"scheduler_factor", num(train.scheduler_factor), "plateau learning-rate factor", G::Model},
      {"early_stop_patience", num(train.early_stop_patience), "epochs without improvement before stopping", G::Model},
      {"validation_fraction", num(train.validation_fraction), "training rows held out for early stopping", G::Model},
      {"bn_momentum", num(train.bn_momentum), "batch-norm running-statistics momentum", G::Model},

      {"forest_trees", num(forest.trees), "baseline forest trees", G::Baseline},
      {"forest_max_depth", "0", "baseline forest depth limit (0 = none)", G::Baseline},
      {"forest_min_leaf", num(forest.min_samples_leaf), "baseline forest minimum samples per leaf", G::Baseline},
      {"forest_mtry", "0", "baseline features per split (0 = ceil(p/3))", G::Baseline},

      {"folds", num(cv.folds), "cross-validation folds", G::CV},
      {"repeats", num(cv.repeats), "cross-validation repeats", G::CV},
      {"compare", "false", "evaluate ensemble, single network and random forest", G::CV, true},

      {"n", "1000", "synthetic rows", G::Synth},
      {"noise", "5", "synthetic target noise (degrees)", G::Synth},
  };
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw UsageError("invalid value '" + value + "' for " + key + " (expected " + want + ")");
}

std::size_t parse_size(const std::string& key, std::string_view s) {
  s = trim(s);
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    bad_value(key, std::string(s), "a non-negative integer");
  return v;
}

} // namespace

const std::vector<Key>& keys() {
  static const std::vector<Key> all = build_keys();
  return all;
}

const Key* find_key(std::string_view name) {
  for (const auto& k : keys())
    if (k.name == name) return &k;
  return nullptr;
}

void Settings::set(const std::string& key, std::string value) { values_[key] = std::move(value); }

const std::string& Settings::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw std::logic_error("setting '" + key + "' not resolved");
  return it->second;
}

std::size_t Settings::size(const std::string& key) const { return parse_size(key, str(key)); }

std::uint64_t Settings::u64(const std::string& key) const {
  const std::string_view s = trim(str(key));
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    bad_value(key, str(key), "an unsigned 64-bit integer");
  return v;
}

double Settings::real(const std::string& key) const {
  const std::string_view s = trim(str(key));
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v))
    bad_value(key, str(key), "a finite number");
  return v;
}

bool Settings::flag(const std::string& key) const {
  const auto s = trim(str(key));
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  bad_value(key, str(key), "true or false");
}

std::vector<std::size_t> Settings::sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  const std::string& s = str(key);
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = s.find(',', start);
    out.push_back(parse_size(key, std::string_view(s).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::map<std::string, std::string> parse_config(std::string_view text) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw UsageError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key{trim(line.substr(0, eq))};
    std::replace(key.begin(), key.end(), '-', '_');
    if (!find_key(key))
      throw UsageError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    out[key] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

Settings resolve(const std::vector<Group>& groups, const std::map<std::string, std::string>& file,
                 const std::map<std::string, std::string>& cli) {
  Settings s;
  for (const auto& k : keys()) {
    if (std::find(groups.begin(), groups.end(), k.group) == groups.end()) continue;
    std::string v = k.default_value;
    if (const auto it = file.find(k.name); it != file.end()) v = it->second;
    if (const auto it = cli.find(k.name); it != cli.end()) v = it->second;
    s.set(k.name, v);
  }
  return s;
}

namespace {

std::optional<std::size_t> zero_is_none(std::size_t v) {
  if (v == 0) return std::nullopt;
  return v;
}

} // namespace

ensemble::PipelineConfig pipeline_config(const Settings& s) {
  ensemble::PipelineConfig p;
  if (s.has("k")) {
    p.select_k = s.size("k");
    p.selection_runs = s.size("runs");
    p.selection_forest.trees = s.size("selection_trees");
    p.selection_forest.max_depth = zero_is_none(s.size("selection_max_depth"));
    p.selection_forest.min_samples_leaf = s.size("selection_min_leaf");
    p.selection_forest.features_per_split = zero_is_none(s.size("selection_mtry"));
    p.global_selection = s.flag("global_selection");
  }
  if (s.has("members")) {
    auto& e = p.ensemble;
    e.members = s.size("members");
    e.lr_spread = s.real("lr_spread");
    e.patiences = s.sizes("patiences");
    e.arch.hidden = s.sizes("hidden");
    if (e.arch.hidden.empty()) throw UsageError("hidden needs at least one width");
    e.arch.dropout = s.real("dropout");
    e.arch.leaky_slope = s.real("leaky_slope");
    e.arch.residual = s.flag("residual");
    auto& t = e.train;
    t.max_epochs = s.size("max_epochs");
    t.batch_size = s.size("batch_size");
    t.loss_alpha = s.real("loss_alpha");
    t.huber_delta = s.real("huber_delta");
    t.clip_norm = s.real("clip_norm");
    t.learning_rate = s.real("learning_rate");
    t.weight_decay = s.real("weight_decay");
    t.beta1 = s.real("beta1");
    t.beta2 = s.real("beta2");
    t.epsilon = s.real("epsilon");
    t.scheduler_patience = s.size("scheduler_patience");
    t.scheduler_factor = s.real("scheduler_factor");
    t.early_stop_patience = s.size("early_stop_patience");
    t.validation_fraction = s.real("validation_fraction");
    t.bn_momentum = s.real("bn_momentum");
  }
  if (s.has("forest_trees")) {
    p.baseline_forest.trees = s.size("forest_trees");
    p.baseline_forest.max_depth = zero_is_none(s.size("forest_max_depth"));
    p.baseline_forest.min_samples_leaf = s.size("forest_min_leaf");
    p.baseline_forest.features_per_split = zero_is_none(s.size("forest_mtry"));
  }
  return p;
}

texture::ExtractOptions extract_options(const Settings& s) {
  texture::ExtractOptions o;
  const auto& border = s.str("border");
  if (border == "reflect") {
    o.border = texture::BorderPolicy::Reflect;
  } else if (border == "zero") {
    o.border = texture::BorderPolicy::Zero;
  } else {
    bad_value("border", border, "reflect or zero");
  }
  o.half_window = static_cast<int>(s.size("half_window"));
  o.bins = static_cast<int>(s.size("bins"));
  const auto conn = s.size("connectivity");
  if (conn != 4 && conn != 8) bad_value("connectivity", s.str("connectivity"), "4 or 8");
  o.connectivity = conn == 4 ? texture::Connectivity::Four : texture::Connectivity::Eight;
  o.normalize_contrast = s.flag("normalize_contrast");
  o.area_scale = s.real("area_scale");
  return o;
}

} // namespace wetpred::cli
