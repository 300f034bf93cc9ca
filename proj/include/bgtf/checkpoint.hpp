#pragma once
// Versioned model checkpoint:
//   magic "BGTF" | version u32 | config-block length u64 + canonical JSON |
//   tensor count u64 | per tensor: name length u64 + UTF-8 name, rank u64,
//   dims u64..., payload little-endian f64.
// The JSON block carries model kind, configuration, feature spec, scaler,
// split protocol, and (for tree models) the fitted trees. save -> load ->
// save is byte-identical.

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bgtf/features.hpp"
#include "bgtf/model.hpp"
#include "bgtf/trees.hpp"

namespace bgtf {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

inline constexpr char kCheckpointMagic[4] = {'B', 'G', 'T', 'F'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// A fitted model of any kind plus everything needed to evaluate it.
struct TrainedModel {
  ModelKind kind = ModelKind::Hybrid;
  FeatureSpec spec;
  Scaler scaler;
  std::uint64_t split_seed = 0;
  std::array<double, 3> split_fractions = {0.7, 0.15, 0.15};

  std::optional<ModelParams> neural;
  std::optional<CartModel> cart;
  std::optional<ForestModel> forest;
  std::optional<AdaboostModel> adaboost;
  std::optional<GbtModel> gbt;

  // Predictions in original MB units.
  std::vector<double> predict_mb(const std::vector<TaskRecord>& records) const {
    std::vector<std::size_t> idx(records.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    switch (kind) {
      case ModelKind::Hybrid:
      case ModelKind::Transformer: {
        std::vector<EncodedRecord> encoded;
        encoded.reserve(records.size());
        for (const TaskRecord& r : records) encoded.push_back(encode_record(r, spec, scaler));
        Tensor preds = model_forward(encoded, *neural);
        std::vector<double> out(preds.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = scaler.invert_target(preds.at(i));
        return out;
      }
      case ModelKind::Cart:
        return cart_predict(*cart, tree_design_matrix(records, idx, spec, scaler).rows);
      case ModelKind::RandomForest:
        return rf_predict(*forest, tree_design_matrix(records, idx, spec, scaler).rows);
      case ModelKind::Adaboost:
        return adaboost_predict(*adaboost, tree_design_matrix(records, idx, spec, scaler).rows);
      case ModelKind::Gbt:
        return gbt_predict(*gbt, tree_design_matrix(records, idx, spec, scaler).rows);
    }
    throw ConfigError("predict_mb: unhandled model kind");
  }
};

// ---------------------------------------------------------------------------
// JSON mappings (key order is canonical: nlohmann objects sort keys).
// ---------------------------------------------------------------------------

namespace ckpt_json {

using nlohmann::json;

inline json to_json(const FeatureSpec& spec) {
  json features = json::array();
  for (const FeatureDesc& f : spec.features) {
    json j;
    j["name"] = f.name;
    j["kind"] = f.kind == FeatureKind::Numeric ? "numeric" : "categorical";
    j["vocab"] = f.vocab;
    features.push_back(j);
  }
  return features;
}

inline FeatureSpec feature_spec_from_json(const json& j) {
  FeatureSpec spec;
  for (const json& f : j) {
    FeatureDesc d;
    d.name = f.at("name").get<std::string>();
    d.kind = f.at("kind").get<std::string>() == "numeric" ? FeatureKind::Numeric
                                                          : FeatureKind::Categorical;
    d.vocab = f.at("vocab").get<std::vector<std::string>>();
    spec.features.push_back(std::move(d));
  }
  return spec;
}

inline json to_json(const Scaler& s) {
  json j;
  j["feature_names"] = s.feature_names;
  j["mean"] = s.mean;
  j["stddev"] = s.stddev;
  j["passthrough"] = s.passthrough;
  j["target_mean"] = s.target_mean;
  j["target_std"] = s.target_std;
  return j;
}

inline Scaler scaler_from_json(const json& j) {
  Scaler s;
  s.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
  s.passthrough = j.at("passthrough").get<std::vector<bool>>();
  s.target_mean = j.at("target_mean").get<double>();
  s.target_std = j.at("target_std").get<double>();
  return s;
}

inline json to_json(const HybridConfig& c) {
  json j;
  j["n_layers"] = c.n_layers;
  j["d_model"] = c.d_model;
  j["heads"] = c.heads;
  j["gru_hidden"] = c.gru_hidden;
  j["dropout"] = c.dropout;
  j["d_ff"] = c.d_ff;
  j["preset"] = c.preset;
  return j;
}

inline HybridConfig hybrid_config_from_json(const json& j) {
  HybridConfig c;
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.d_model = j.at("d_model").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.gru_hidden = j.at("gru_hidden").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.d_ff = j.at("d_ff").get<std::size_t>();
  c.preset = j.at("preset").get<std::string>();
  return c;
}

inline json to_json(const Tree& t) {
  json nodes = json::array();
  for (const TreeNode& n : t.nodes) {
    json j;
    j["f"] = n.feature;
    j["t"] = n.threshold;
    j["v"] = n.value;
    j["l"] = n.left;
    j["r"] = n.right;
    nodes.push_back(j);
  }
  return nodes;
}

inline Tree tree_from_json(const json& j) {
  Tree t;
  for (const json& n : j) {
    TreeNode node;
    node.feature = n.at("f").get<int>();
    node.threshold = n.at("t").get<double>();
    node.value = n.at("v").get<double>();
    node.left = n.at("l").get<int>();
    node.right = n.at("r").get<int>();
    t.nodes.push_back(node);
  }
  return t;
}

inline json trees_to_json(const std::vector<Tree>& trees) {
  json arr = json::array();
  for (const Tree& t : trees) arr.push_back(to_json(t));
  return arr;
}

inline std::vector<Tree> trees_from_json(const json& arr) {
  std::vector<Tree> out;
  for (const json& t : arr) out.push_back(tree_from_json(t));
  return out;
}

}  // namespace ckpt_json

// ---------------------------------------------------------------------------
// Binary IO
// ---------------------------------------------------------------------------

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) throw IoError("checkpoint: truncated file");
  return v;
}
inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v))) throw IoError("checkpoint: truncated file");
  return v;
}
inline void read_bytes(std::istream& is, void* p, std::size_t n) {
  if (!is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n)))
    throw IoError("checkpoint: truncated file");
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const TrainedModel& model) {
  using nlohmann::json;
  json config;
  config["model_kind"] = model_kind_name(model.kind);
  config["feature_spec"] = ckpt_json::to_json(model.spec);
  config["scaler"] = ckpt_json::to_json(model.scaler);
  config["split"] = {{"seed", model.split_seed},
                     {"fractions", std::vector<double>{model.split_fractions[0],
                                                       model.split_fractions[1],
                                                       model.split_fractions[2]}}};
  std::vector<std::pair<std::string, Tensor>> tensors;
  switch (model.kind) {
    case ModelKind::Hybrid:
    case ModelKind::Transformer:
      config["config"] = ckpt_json::to_json(model.neural->cfg);
      tensors = model.neural->named();
      break;
    case ModelKind::Cart:
      config["tree_model"] = {{"tree", ckpt_json::to_json(model.cart->tree)},
                              {"n_features", model.cart->n_features}};
      break;
    case ModelKind::RandomForest:
      config["tree_model"] = {{"trees", ckpt_json::trees_to_json(model.forest->trees)},
                              {"n_features", model.forest->n_features}};
      break;
    case ModelKind::Adaboost:
      config["tree_model"] = {{"trees", ckpt_json::trees_to_json(model.adaboost->trees)},
                              {"log_inv_beta", model.adaboost->log_inv_beta},
                              {"round_avg_loss", model.adaboost->round_avg_loss},
                              {"fallback_mean", model.adaboost->fallback_mean},
                              {"n_features", model.adaboost->n_features}};
      break;
    case ModelKind::Gbt:
      config["tree_model"] = {{"trees", ckpt_json::trees_to_json(model.gbt->trees)},
                              {"base", model.gbt->base},
                              {"eta", model.gbt->eta},
                              {"n_features", model.gbt->n_features}};
      break;
  }
  const std::string config_text = config.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  detail::write_bytes(os, kCheckpointMagic, 4);
  detail::write_u32(os, kCheckpointVersion);
  detail::write_u64(os, config_text.size());
  detail::write_bytes(os, config_text.data(), config_text.size());
  detail::write_u64(os, tensors.size());
  for (const auto& [name, t] : tensors) {
    detail::write_u64(os, name.size());
    detail::write_bytes(os, name.data(), name.size());
    detail::write_u64(os, t.rank());
    for (std::size_t d : t.shape()) detail::write_u64(os, d);
    detail::write_bytes(os, t.data().data(), t.size() * sizeof(double));
  }
  if (!os) throw IoError("write failed for " + path);
}

inline TrainedModel load_checkpoint(const std::string& path) {
  using nlohmann::json;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[4];
  detail::read_bytes(is, magic, 4);
  if (std::string(magic, 4) != std::string(kCheckpointMagic, 4))
    throw IoError(path + ": not a checkpoint (bad magic)");
  const std::uint32_t version = detail::read_u32(is);
  if (version != kCheckpointVersion)
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t config_len = detail::read_u64(is);
  std::string config_text(config_len, '\0');
  detail::read_bytes(is, config_text.data(), config_len);
  json config = json::parse(config_text, nullptr, /*allow_exceptions=*/false);
  if (config.is_discarded()) throw IoError(path + ": corrupt config block");

  TrainedModel model;
  model.kind = model_kind_from_name(config.at("model_kind").get<std::string>());
  model.spec = ckpt_json::feature_spec_from_json(config.at("feature_spec"));
  model.scaler = ckpt_json::scaler_from_json(config.at("scaler"));
  model.split_seed = config.at("split").at("seed").get<std::uint64_t>();
  const auto fr = config.at("split").at("fractions").get<std::vector<double>>();
  if (fr.size() != 3) throw IoError(path + ": malformed split fractions");
  model.split_fractions = {fr[0], fr[1], fr[2]};

  const std::uint64_t n_tensors = detail::read_u64(is);
  std::vector<std::pair<std::string, Tensor>> tensors;
  for (std::uint64_t i = 0; i < n_tensors; ++i) {
    const std::uint64_t name_len = detail::read_u64(is);
    std::string name(name_len, '\0');
    detail::read_bytes(is, name.data(), name_len);
    const std::uint64_t rank = detail::read_u64(is);
    Shape shape(rank);
    for (std::uint64_t d = 0; d < rank; ++d) shape[d] = detail::read_u64(is);
    Tensor t = Tensor::zeros(shape);
    detail::read_bytes(is, t.data().data(), t.size() * sizeof(double));
    tensors.emplace_back(std::move(name), std::move(t));
  }

  switch (model.kind) {
    case ModelKind::Hybrid:
    case ModelKind::Transformer: {
      const HybridConfig cfg = ckpt_json::hybrid_config_from_json(config.at("config"));
      SeededRng rng(0);  // skeleton only; every tensor is overwritten below
      ModelParams params = ModelParams::init(model.kind, cfg, model.spec, rng);
      auto named = params.named();
      if (named.size() != tensors.size())
        throw SchemaError(path + ": checkpoint has " + std::to_string(tensors.size()) +
                          " tensors, model expects " + std::to_string(named.size()));
      for (std::size_t k = 0; k < named.size(); ++k) {
        if (named[k].first != tensors[k].first)
          throw SchemaError(path + ": tensor '" + tensors[k].first + "' does not match expected '" +
                            named[k].first + "'");
        named[k].second.copy_data_from(tensors[k].second);
      }
      model.neural = std::move(params);
      break;
    }
    case ModelKind::Cart: {
      CartModel m;
      m.tree = ckpt_json::tree_from_json(config.at("tree_model").at("tree"));
      m.n_features = config.at("tree_model").at("n_features").get<std::size_t>();
      model.cart = std::move(m);
      break;
    }
    case ModelKind::RandomForest: {
      ForestModel m;
      m.trees = ckpt_json::trees_from_json(config.at("tree_model").at("trees"));
      m.n_features = config.at("tree_model").at("n_features").get<std::size_t>();
      model.forest = std::move(m);
      break;
    }
    case ModelKind::Adaboost: {
      AdaboostModel m;
      m.trees = ckpt_json::trees_from_json(config.at("tree_model").at("trees"));
      m.log_inv_beta = config.at("tree_model").at("log_inv_beta").get<std::vector<double>>();
      m.round_avg_loss = config.at("tree_model").at("round_avg_loss").get<std::vector<double>>();
      m.fallback_mean = config.at("tree_model").at("fallback_mean").get<double>();
      m.n_features = config.at("tree_model").at("n_features").get<std::size_t>();
      model.adaboost = std::move(m);
      break;
    }
    case ModelKind::Gbt: {
      GbtModel m;
      m.trees = ckpt_json::trees_from_json(config.at("tree_model").at("trees"));
      m.base = config.at("tree_model").at("base").get<double>();
      m.eta = config.at("tree_model").at("eta").get<double>();
      m.n_features = config.at("tree_model").at("n_features").get<std::size_t>();
      model.gbt = std::move(m);
      break;
    }
  }
  return model;
}

// Names+kinds comparison between a checkpoint's feature spec and the schema
// of the data being evaluated. Vocabulary contents are checked per record at
// encode time, not here.
inline void require_schema_match(const FeatureSpec& checkpoint_spec, const FeatureSpec& data_spec) {
  auto describe = [](const FeatureSpec& s) {
    std::string out;
    for (const FeatureDesc& f : s.features) {
      if (!out.empty()) out += ", ";
      out += f.name + (f.kind == FeatureKind::Numeric ? ":numeric" : ":categorical");
    }
    return out;
  };
  bool ok = checkpoint_spec.count() == data_spec.count();
  for (std::size_t i = 0; ok && i < data_spec.count(); ++i)
    ok = checkpoint_spec.features[i].name == data_spec.features[i].name &&
         checkpoint_spec.features[i].kind == data_spec.features[i].kind;
  if (!ok)
    throw SchemaError("feature spec mismatch.\n  checkpoint: [" + describe(checkpoint_spec) +
                      "]\n  data:       [" + describe(data_spec) + "]");
}

}  // namespace bgtf
