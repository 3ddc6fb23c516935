#pragma once

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "hanet/corpus.hpp"
#include "hanet/model.hpp"

namespace hanet {

// Flat JSON checkpoint: format version, model config, vocabulary, and one
// {rows, cols, values} entry per parameter tensor. Doubles are serialized in
// shortest round-trip form, so save/load is bit-exact.

inline constexpr int kCheckpointFormatVersion = 1;

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["variant"] = to_string(cfg.variant);
  j["direction"] = to_string(cfg.direction);
  j["aggregation"] = to_string(cfg.aggregation);
  j["gated"] = cfg.gated;
  j["d"] = cfg.d;
  j["d_s"] = cfg.d_s;
  j["d_d"] = cfg.d_d;
  j["vocab_size"] = cfg.vocab_size;
  j["n_classes"] = cfg.n_classes;
  j["dropout"] = cfg.dropout_rate;
  j["trainable_embeddings"] = cfg.trainable_embeddings;
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "variant", "direction",  "aggregation", "gated",
      "d",       "d_s",        "d_d",         "vocab_size",
      "n_classes", "dropout",  "trainable_embeddings"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("model config: unknown key \"" + it.key() + "\"");
  ModelConfig cfg;
  try {
    cfg.variant = variant_from_string(j.at("variant").get<std::string>());
    cfg.direction = direction_from_string(j.at("direction").get<std::string>());
    cfg.aggregation =
        aggregation_from_string(j.at("aggregation").get<std::string>());
    cfg.gated = j.at("gated").get<bool>();
    cfg.d = j.at("d").get<int>();
    cfg.d_s = j.at("d_s").get<int>();
    cfg.d_d = j.at("d_d").get<int>();
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.n_classes = j.at("n_classes").get<int>();
    cfg.dropout_rate = j.at("dropout").get<double>();
    cfg.trainable_embeddings = j.at("trainable_embeddings").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return cfg;
}

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  Vocab vocab;
};

inline void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                            const ModelParams& params, const Vocab& vocab) {
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["config"] = model_config_to_json(cfg);

  nlohmann::json jv;
  jv["tokens"] = vocab.id_to_token;
  jv["counts"] = vocab.counts;
  jv["min_count"] = vocab.min_count;
  j["vocab"] = jv;

  nlohmann::json jp;
  visit_params(const_cast<ModelParams&>(params), cfg,
               [&](const std::string& name, Tensor& x) {
                 nlohmann::json e;
                 e["rows"] = x.rows();
                 e["cols"] = x.cols();
                 std::vector<double> vals(x.data(), x.data() + x.size());
                 e["values"] = vals;
                 jp[name] = std::move(e);
               });
  j["params"] = std::move(jp);

  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  }
  if (!j.contains("format_version") ||
      j.at("format_version").get<int>() != kCheckpointFormatVersion)
    throw DataError("checkpoint " + path + ": unsupported format version");

  Checkpoint ck;
  try {
    ck.config = model_config_from_json(j.at("config"));
    ck.config.validate();

    const auto& jv = j.at("vocab");
    ck.vocab.id_to_token = jv.at("tokens").get<std::vector<std::string>>();
    ck.vocab.counts = jv.at("counts").get<std::vector<long>>();
    ck.vocab.min_count = jv.at("min_count").get<int>();
    if (ck.vocab.id_to_token.size() != ck.vocab.counts.size() ||
        ck.vocab.size() < 2)
      throw DataError("checkpoint " + path + ": malformed vocab");
    for (int i = 2; i < ck.vocab.size(); ++i)
      ck.vocab.token_to_id[ck.vocab.id_to_token[i]] = i;
    if (ck.vocab.size() != ck.config.vocab_size)
      throw DataError("checkpoint " + path + ": vocab size disagrees with config");

    ck.params = allocate_params(ck.config);
    const auto& jp = j.at("params");
    std::size_t seen = 0;
    visit_params(ck.params, ck.config, [&](const std::string& name, Tensor& x) {
      if (!jp.contains(name))
        throw DataError("checkpoint " + path + ": missing tensor " + name);
      const auto& e = jp.at(name);
      if (e.at("rows").get<int>() != x.rows() ||
          e.at("cols").get<int>() != x.cols())
        throw DataError("checkpoint " + path + ": shape mismatch in " + name);
      const auto vals = e.at("values").get<std::vector<double>>();
      if (vals.size() != x.size())
        throw DataError("checkpoint " + path + ": value count mismatch in " + name);
      for (std::size_t i = 0; i < vals.size(); ++i) x[i] = vals[i];
      ++seen;
    });
    if (seen != jp.size())
      throw DataError("checkpoint " + path + ": extra tensors present");
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("checkpoint " + path + ": " + e.what());
  }
  return ck;
}

}  // namespace hanet
