#include "glee/train/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "glee/common/binary_io.hpp"
#include "glee/common/error.hpp"
#include "json.hpp"

namespace glee::train {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.contains(it.key())) throw ConfigError("config: unknown key " + where + it.key());
  }
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json model_json(const ModelConfig& m) {
  return json{{"canonical_size", m.canonical_size},
              {"margin", m.embedding.margin},
              {"backbone_widths", m.embedding.backbone_widths},
              {"local_widths", m.embedding.local_widths},
              {"attention_heads", m.embedding.attention_heads},
              {"attention_key_dim", m.embedding.attention_key_dim},
              {"local_hidden", m.embedding.local_hidden},
              {"au_count", m.classifier.au_count},
              {"token_dim", m.classifier.token_dim},
              {"view_hidden", m.classifier.view_hidden},
              {"encoder_count", m.classifier.encoder_count},
              {"head_count", m.classifier.head_count},
              {"feedforward_width", m.classifier.feedforward_width}};
}

ModelConfig model_from(const json& j) {
  if (!j.is_object()) throw ConfigError("config: model must be an object");
  reject_unknown(j,
                 {"canonical_size", "margin", "backbone_widths", "local_widths",
                  "attention_heads", "attention_key_dim", "local_hidden", "au_count",
                  "token_dim", "view_hidden", "encoder_count", "head_count",
                  "feedforward_width"},
                 "model.");
  ModelConfig m;
  take(j, "canonical_size", m.canonical_size);
  take(j, "margin", m.embedding.margin);
  take(j, "backbone_widths", m.embedding.backbone_widths);
  take(j, "local_widths", m.embedding.local_widths);
  take(j, "attention_heads", m.embedding.attention_heads);
  take(j, "attention_key_dim", m.embedding.attention_key_dim);
  take(j, "local_hidden", m.embedding.local_hidden);
  take(j, "au_count", m.classifier.au_count);
  take(j, "token_dim", m.classifier.token_dim);
  take(j, "view_hidden", m.classifier.view_hidden);
  take(j, "encoder_count", m.classifier.encoder_count);
  take(j, "head_count", m.classifier.head_count);
  take(j, "feedforward_width", m.classifier.feedforward_width);
  return m;
}

json config_json(const TrainConfig& c) {
  return json{{"stage", to_string(c.stage)},
              {"optimizer", {{"learning_rate", c.learning_rate}, {"momentum", c.momentum}}},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"fresh_start", c.fresh_start},
              {"fixed_branches", c.fixed_branches},
              {"early_stop_f1", c.early_stop_f1 ? json(*c.early_stop_f1) : json(nullptr)},
              {"model", model_json(c.model)}};
}

}  // namespace

std::string to_string(Stage s) { return s == Stage::pretrain ? "pretrain" : "finetune"; }

Stage parse_stage(const std::string& s) {
  if (s == "pretrain") return Stage::pretrain;
  if (s == "finetune") return Stage::finetune;
  throw ConfigError("unknown stage '" + s + "' (expected pretrain or finetune)");
}

void ModelConfig::validate() const {
  if (canonical_size < 16) throw ConfigError("model: canonical_size must be at least 16");
  embedding.validate();
  classifier.validate();
  if (classifier.feature_dim != embed::kEmbedDim + 51) {
    throw ConfigError("model: classifier feature_dim must be 16 + 51");
  }
}

TrainConfig TrainConfig::defaults(Stage stage) {
  TrainConfig c;
  c.stage = stage;
  c.learning_rate = stage == Stage::pretrain ? 2e-4 : 2e-3;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("config: learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("config: momentum must be in [0, 1)");
  if (batch_size == 0) throw ConfigError("config: batch_size must be positive");
  if (early_stop_f1 && !(*early_stop_f1 > 0.0 && *early_stop_f1 <= 1.0)) {
    throw ConfigError("config: early_stop_f1 must be in (0, 1]");
  }
  model.validate();
}

TrainConfig parse_config(const std::string& text, Stage fallback_stage) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  try {
    reject_unknown(j,
                   {"stage", "optimizer", "epochs", "batch_size", "seed", "fresh_start",
                    "fixed_branches", "early_stop_f1", "model"},
                   "");
    const Stage stage = j.contains("stage") ? parse_stage(j.at("stage").get<std::string>())
                                            : fallback_stage;
    TrainConfig c = TrainConfig::defaults(stage);
    if (j.contains("optimizer")) {
      const json& o = j.at("optimizer");
      if (!o.is_object()) throw ConfigError("config: optimizer must be an object");
      reject_unknown(o, {"learning_rate", "momentum"}, "optimizer.");
      take(o, "learning_rate", c.learning_rate);
      take(o, "momentum", c.momentum);
    }
    take(j, "epochs", c.epochs);
    take(j, "batch_size", c.batch_size);
    take(j, "seed", c.seed);
    take(j, "fresh_start", c.fresh_start);
    take(j, "fixed_branches", c.fixed_branches);
    if (j.contains("early_stop_f1") && !j.at("early_stop_f1").is_null()) {
      c.early_stop_f1 = j.at("early_stop_f1").get<double>();
    }
    if (j.contains("model")) c.model = model_from(j.at("model"));
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

TrainConfig load_config(const std::string& path, Stage fallback_stage) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), fallback_stage);
}

std::string to_json(const TrainConfig& config) { return config_json(config).dump(2); }

std::string to_json(const ModelConfig& config) { return model_json(config).dump(2); }

ModelConfig parse_model_config(const std::string& text) {
  try {
    ModelConfig m = model_from(json::parse(text));
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

std::string config_hash(const TrainConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(io::fnv1a(config_json(config).dump())));
  return buf;
}

}  // namespace glee::train
