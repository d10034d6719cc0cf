#include <cmath>

#include <json.hpp>

#include "wetpred/error.hpp"
#include "wetpred/io.hpp"

namespace wetpred::io {

using nlohmann::json;

namespace {

json vec_json(const double* data, Eigen::Index n) {
  json a = json::array();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(data[i])) throw Error("non-finite parameter in model");
    a.push_back(data[i]);
  }
  return a;
}

json to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", vec_json(m.data(), m.size())}};
}
json to_json(const Vector& v) { return vec_json(v.data(), v.size()); }
json to_json(const RowVector& v) { return vec_json(v.data(), v.size()); }

template <typename V>
V vector_from(const json& j, Eigen::Index expected) {
  const auto& a = j;
  if (!a.is_array()) throw CorruptArtifact("expected an array");
  if (expected >= 0 && static_cast<Eigen::Index>(a.size()) != expected)
    throw CorruptArtifact("array has " + std::to_string(a.size()) + " entries, expected " +
                          std::to_string(expected));
  V v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

Matrix matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols) {
  const auto r = j.at("rows").get<Eigen::Index>();
  const auto c = j.at("cols").get<Eigen::Index>();
  if (r != rows || c != cols) throw CorruptArtifact("tensor shape does not match architecture");
  const auto flat = vector_from<Vector>(j.at("data"), r * c);
  Matrix m(r, c);
  std::copy(flat.data(), flat.data() + flat.size(), m.data());
  return m;
}

json forest_json(const forest::ForestParams& p) {
  json j{{"trees", p.trees},
         {"min_samples_leaf", p.min_samples_leaf},
         {"bootstrap", p.bootstrap},
         {"max_depth", nullptr},
         {"features_per_split", nullptr}};
  if (p.max_depth) j["max_depth"] = *p.max_depth;
  if (p.features_per_split) j["features_per_split"] = *p.features_per_split;
  return j;
}

json arch_json(const nn::Architecture& a) {
  return {{"input_width", a.input_width}, {"hidden", a.hidden},
          {"dropout", a.dropout},         {"leaky_slope", a.leaky_slope},
          {"residual", a.residual}};
}

nn::Architecture arch_from(const json& j) {
  nn::Architecture a;
  a.input_width = j.at("input_width").get<std::size_t>();
  a.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  a.dropout = j.at("dropout").get<double>();
  a.leaky_slope = j.at("leaky_slope").get<double>();
  a.residual = j.at("residual").get<bool>();
  return a;
}

json train_json(const nn::TrainConfig& t) {
  return {{"max_epochs", t.max_epochs},
          {"batch_size", t.batch_size},
          {"loss_alpha", t.loss_alpha},
          {"huber_delta", t.huber_delta},
          {"clip_norm", t.clip_norm},
          {"learning_rate", t.learning_rate},
          {"weight_decay", t.weight_decay},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"epsilon", t.epsilon},
          {"scheduler_patience", t.scheduler_patience},
          {"scheduler_factor", t.scheduler_factor},
          {"early_stop_patience", t.early_stop_patience},
          {"validation_fraction", t.validation_fraction},
          {"bn_momentum", t.bn_momentum}};
}

nn::TrainConfig train_from(const json& j) {
  nn::TrainConfig t;
  t.max_epochs = j.at("max_epochs").get<std::size_t>();
  t.batch_size = j.at("batch_size").get<std::size_t>();
  t.loss_alpha = j.at("loss_alpha").get<double>();
  t.huber_delta = j.at("huber_delta").get<double>();
  t.clip_norm = j.at("clip_norm").get<double>();
  t.learning_rate = j.at("learning_rate").get<double>();
  t.weight_decay = j.at("weight_decay").get<double>();
  t.beta1 = j.at("beta1").get<double>();
  t.beta2 = j.at("beta2").get<double>();
  t.epsilon = j.at("epsilon").get<double>();
  t.scheduler_patience = j.at("scheduler_patience").get<std::size_t>();
  t.scheduler_factor = j.at("scheduler_factor").get<double>();
  t.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
  t.validation_fraction = j.at("validation_fraction").get<double>();
  t.bn_momentum = j.at("bn_momentum").get<double>();
  return t;
}

json network_json(const nn::Network& net) {
  json blocks = json::array();
  for (std::size_t l = 0; l < net.params.blocks.size(); ++l) {
    const auto& b = net.params.blocks[l];
    blocks.push_back({{"weight", to_json(b.weight)},
                      {"bias", to_json(b.bias)},
                      {"gamma", to_json(b.gamma)},
                      {"beta", to_json(b.beta)},
                      {"running_mean", to_json(net.stats[l].mean)},
                      {"running_var", to_json(net.stats[l].var)},
                      {"skip", static_cast<bool>(net.skip[l])}});
  }
  return {{"blocks", blocks},
          {"head_weight", to_json(net.params.head_weight)},
          {"head_bias", to_json(net.params.head_bias)}};
}

nn::Network network_from(const json& j, const nn::Architecture& arch) {
  nn::Network net;
  net.arch = arch;
  const auto& blocks = j.at("blocks");
  if (!blocks.is_array() || blocks.size() != arch.hidden.size())
    throw CorruptArtifact("block count does not match architecture");
  auto in = static_cast<Eigen::Index>(arch.input_width);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    const auto& b = blocks[l];
    const auto out = static_cast<Eigen::Index>(arch.hidden[l]);
    nn::BlockParams p;
    p.weight = matrix_from(b.at("weight"), in, out);
    p.bias = vector_from<RowVector>(b.at("bias"), out);
    p.gamma = vector_from<RowVector>(b.at("gamma"), out);
    p.beta = vector_from<RowVector>(b.at("beta"), out);
    net.params.blocks.push_back(std::move(p));
    net.stats.push_back({vector_from<RowVector>(b.at("running_mean"), out),
                         vector_from<RowVector>(b.at("running_var"), out)});
    net.skip.push_back(b.at("skip").get<bool>());
    in = out;
  }
  net.params.head_weight = vector_from<Vector>(j.at("head_weight"), in);
  net.params.head_bias = vector_from<RowVector>(j.at("head_bias"), 1);
  return net;
}

json pipeline_json(const ensemble::PipelineConfig& cfg) {
  const auto& e = cfg.ensemble;
  return {{"select_k", cfg.select_k},
          {"selection_runs", cfg.selection_runs},
          {"selection_forest", forest_json(cfg.selection_forest)},
          {"global_selection", cfg.global_selection},
          {"baseline_forest", forest_json(cfg.baseline_forest)},
          {"ensemble",
           {{"members", e.members},
            {"lr_spread", e.lr_spread},
            {"patiences", e.patiences},
            {"architecture", arch_json(e.arch)},
            {"train", train_json(e.train)}}}};
}

} // namespace

std::string serialize_pipeline_config(const ensemble::PipelineConfig& cfg) {
  return pipeline_json(cfg).dump();
}

std::string config_digest(const ensemble::PipelineConfig& cfg) {
  return hex64(fnv1a(serialize_pipeline_config(cfg)));
}

std::string serialize_model(const ModelArtifact& artifact) {
  const auto& ens = artifact.model;
  json members = json::array();
  for (std::size_t i = 0; i < ens.members.size(); ++i) {
    const auto& m = ens.members[i];
    const auto& mc = ens.member_configs[i];
    members.push_back({{"seed", mc.seed},
                       {"train", train_json(mc.train)},
                       {"best_epoch", m.best_epoch},
                       {"best_val_loss", m.best_val_loss},
                       {"history",
                        {{"train_loss", m.history.train_loss},
                         {"val_loss", m.history.val_loss},
                         {"learning_rate", m.history.learning_rate}}},
                       {"network", network_json(m.net)}});
  }
  json transform = json::array();
  for (const auto& c : ens.transform.columns)
    transform.push_back(
        {{"name", c.name}, {"lambda", c.lambda}, {"mean", c.mean}, {"stddev", c.stddev}});
  const json doc{{"format", kArtifactFormat},
                 {"version", artifact.version},
                 {"config_digest", artifact.config_digest},
                 {"selected_features", ens.selected_features},
                 {"transform", transform},
                 {"target_scaler", {{"mean", ens.target_scaler.mean}, {"stddev", ens.target_scaler.stddev}}},
                 {"architecture", arch_json(ens.arch)},
                 {"members", members}};
  return doc.dump(1) + "\n";
}

ModelArtifact parse_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw CorruptArtifact(std::string("unparsable model artifact: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("format", std::string()) != kArtifactFormat)
      throw CorruptArtifact("not a wetpred model artifact");
    const auto& ver = doc.at("version");
    if (!ver.is_number_integer() || ver.get<long long>() != kArtifactVersion)
      throw VersionMismatch("artifact version " + ver.dump() + ", this build reads version " +
                            std::to_string(kArtifactVersion));
    ModelArtifact art;
    art.version = kArtifactVersion;
    art.config_digest = doc.at("config_digest").get<std::string>();
    auto& ens = art.model;
    ens.selected_features = doc.at("selected_features").get<std::vector<std::string>>();
    for (const auto& c : doc.at("transform"))
      ens.transform.columns.push_back({c.at("name").get<std::string>(), c.at("lambda").get<double>(),
                                       c.at("mean").get<double>(), c.at("stddev").get<double>()});
    if (ens.transform.names() != ens.selected_features)
      throw CorruptArtifact("transform columns differ from the selected features");
    ens.target_scaler.mean = doc.at("target_scaler").at("mean").get<double>();
    ens.target_scaler.stddev = doc.at("target_scaler").at("stddev").get<double>();
    ens.arch = arch_from(doc.at("architecture"));
    if (ens.arch.input_width != ens.selected_features.size())
      throw CorruptArtifact("input width differs from the selected feature count");
    const auto& members = doc.at("members");
    if (!members.is_array() || members.empty()) throw CorruptArtifact("artifact has no members");
    for (const auto& m : members) {
      ensemble::MemberConfig mc;
      mc.seed = m.at("seed").get<std::uint64_t>();
      mc.train = train_from(m.at("train"));
      nn::TrainedModel tm;
      tm.best_epoch = m.at("best_epoch").get<std::size_t>();
      tm.best_val_loss = m.at("best_val_loss").get<double>();
      const auto& h = m.at("history");
      tm.history.train_loss = h.at("train_loss").get<std::vector<double>>();
      tm.history.val_loss = h.at("val_loss").get<std::vector<double>>();
      tm.history.learning_rate = h.at("learning_rate").get<std::vector<double>>();
      tm.net = network_from(m.at("network"), ens.arch);
      ens.member_configs.push_back(std::move(mc));
      ens.members.push_back(std::move(tm));
    }
    return art;
  } catch (const json::exception& e) {
    throw CorruptArtifact(std::string("malformed model artifact: ") + e.what());
  }
}

void save_model(const ModelArtifact& artifact, const fs::path& path) {
  write_file_atomic(path, serialize_model(artifact));
}

ModelArtifact load_model(const fs::path& path) { return parse_model(read_file(path)); }

} // namespace wetpred::io
