#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "glee/au/classifier.hpp"
#include "glee/embed/network.hpp"

namespace glee::train {

enum class Stage { pretrain, finetune };

std::string to_string(Stage s);
Stage parse_stage(const std::string& s);

struct ModelConfig {
  std::size_t canonical_size = 176;
  embed::EmbeddingConfig embedding;
  au::ClassifierConfig classifier;

  void validate() const;
};

struct TrainConfig {
  Stage stage = Stage::pretrain;
  double learning_rate = 2e-4;
  double momentum = 0.9;
  std::size_t epochs = 10;
  std::size_t batch_size = 30;
  std::uint64_t seed = 0;
  // "w/o pretrain" ablation: the embedding network starts from the seed
  // instead of the init checkpoint.
  bool fresh_start = false;
  // "w. fixed GB & LB": the embedding network is not updated in finetuning.
  bool fixed_branches = false;
  // Finetuning stops after the first epoch whose training-set average F1
  // reaches this value. Unset trains every epoch.
  std::optional<double> early_stop_f1;
  ModelConfig model;

  // Stage defaults: lr 2e-4 / 2e-3, momentum 0.9, 10 epochs, batch 30.
  static TrainConfig defaults(Stage stage);
  void validate() const;
};

// Nested JSON: {"stage", "optimizer": {"learning_rate", "momentum"},
// "epochs", "batch_size", "seed", "fresh_start", "fixed_branches",
// "early_stop_f1", "model": {...}}. Missing keys take the stage defaults;
// unknown keys are rejected. fallback_stage applies when "stage" is absent.
TrainConfig parse_config(const std::string& json_text, Stage fallback_stage);
TrainConfig load_config(const std::string& path, Stage fallback_stage);
std::string to_json(const TrainConfig& config);
std::string to_json(const ModelConfig& config);
ModelConfig parse_model_config(const std::string& json_text);

// FNV-1a of the canonical JSON, 16 hex digits.
std::string config_hash(const TrainConfig& config);

}  // namespace glee::train
