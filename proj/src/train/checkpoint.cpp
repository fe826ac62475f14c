#include "glee/train/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "glee/common/binary_io.hpp"
#include "glee/common/error.hpp"
#include "json.hpp"

namespace glee::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kWeightsFile = "weights.bin";
constexpr const char* kMetaFile = "meta.json";

nn::ParameterList saved_parameters(GleeModel& model, Stage stage) {
  nn::ParameterList p = model.embedding_parameters();
  const nn::ParameterList id = model.identity_parameters();
  p.insert(p.end(), id.begin(), id.end());
  if (stage == Stage::finetune) {
    const nn::ParameterList c = model.classifier_parameters();
    p.insert(p.end(), c.begin(), c.end());
  }
  return p;
}

}  // namespace

void save_checkpoint(const std::string& dir, GleeModel& model, const CheckpointMeta& meta) {
  const fs::path target(dir);
  const std::string suffix = "." + std::to_string(::getpid());
  const fs::path tmp = target.string() + ".tmp" + suffix;
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  nn::save_weights((tmp / kWeightsFile).string(), nn::snapshot(saved_parameters(model, meta.stage)));
  const json j{{"format", "glee-checkpoint"},
               {"version", meta.version},
               {"stage", to_string(meta.stage)},
               {"n_au", meta.au_count},
               {"config_hash", meta.config_hash},
               {"seed", meta.seed},
               {"model", json::parse(to_json(meta.model))},
               {"loss_history", meta.loss_history}};
  io::write_text_atomic((tmp / kMetaFile).string(), j.dump(2) + "\n");

  if (fs::exists(target)) {
    const fs::path old = target.string() + ".old" + suffix;
    fs::remove_all(old);
    fs::rename(target, old);
    fs::rename(tmp, target);
    fs::remove_all(old);
  } else {
    fs::rename(tmp, target);
  }
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw CorruptCheckpoint("checkpoint " + dir + " is not a directory");
  std::ifstream in(root / kMetaFile);
  if (!in) throw CorruptCheckpoint("checkpoint " + dir + " has no meta.json");
  std::stringstream ss;
  ss << in.rdbuf();

  Checkpoint ck;
  try {
    const json j = json::parse(ss.str());
    if (j.at("format").get<std::string>() != "glee-checkpoint") {
      throw CorruptCheckpoint("checkpoint " + dir + ": unexpected format tag");
    }
    ck.meta.version = j.at("version").get<std::uint32_t>();
    if (ck.meta.version != kCheckpointVersion) {
      throw VersionMismatch("checkpoint " + dir + " has version " +
                            std::to_string(ck.meta.version) + ", expected " +
                            std::to_string(kCheckpointVersion));
    }
    ck.meta.stage = parse_stage(j.at("stage").get<std::string>());
    ck.meta.au_count = j.at("n_au").get<std::size_t>();
    ck.meta.config_hash = j.at("config_hash").get<std::string>();
    ck.meta.seed = j.at("seed").get<std::uint64_t>();
    ck.meta.model = parse_model_config(j.at("model").dump());
    ck.meta.loss_history = j.at("loss_history").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw CorruptCheckpoint("checkpoint " + dir + ": bad meta.json: " + e.what());
  } catch (const ConfigError& e) {
    throw CorruptCheckpoint("checkpoint " + dir + ": " + e.what());
  }
  if (ck.meta.au_count != ck.meta.model.classifier.au_count) {
    throw CorruptCheckpoint("checkpoint " + dir + ": n_au disagrees with the model config");
  }
  if (!fs::exists(root / kWeightsFile)) throw CorruptCheckpoint("checkpoint " + dir + " has no weights.bin");
  ck.weights = nn::load_weights((root / kWeightsFile).string());
  return ck;
}

GleeModel restore_model(const Checkpoint& ck) {
  GleeModel model(ck.meta.model, ck.meta.seed);
  nn::assign(saved_parameters(model, ck.meta.stage), ck.weights);
  return model;
}

GleeModel finetune_init(const Checkpoint& init, const TrainConfig& config, std::size_t au_count) {
  if (init.meta.au_count != au_count) {
    throw ValidationError("N_a mismatch: init checkpoint has " + std::to_string(init.meta.au_count) +
                          " AUs, manifest has " + std::to_string(au_count));
  }
  if (config.fresh_start) return GleeModel(init.meta.model, config.seed);
  GleeModel model = restore_model(init);
  if (init.meta.stage == Stage::pretrain) model.reset_classifier();
  return model;
}

}  // namespace glee::train
