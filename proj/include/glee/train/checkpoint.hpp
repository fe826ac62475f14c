#pragma once

// A checkpoint is a directory holding
//   weights.bin  tensors in the GLEEWTS1 layout (see nn/serialize.hpp)
//   meta.json    {"format", "version", "stage", "n_au", "config_hash",
//                 "seed", "model", "loss_history"}
// Pretrain checkpoints carry the embedding network only (identity model
// included); finetune checkpoints add the AU classifier.

#include <cstdint>
#include <string>
#include <vector>

#include "glee/nn/serialize.hpp"
#include "glee/train/config.hpp"
#include "glee/train/model.hpp"

namespace glee::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint32_t version = kCheckpointVersion;
  Stage stage = Stage::pretrain;
  std::size_t au_count = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
  ModelConfig model;
  std::vector<double> loss_history;
};

struct Checkpoint {
  CheckpointMeta meta;
  std::vector<nn::NamedTensor> weights;
};

// Writes into a temporary sibling directory and renames it into place.
void save_checkpoint(const std::string& dir, GleeModel& model, const CheckpointMeta& meta);

// CorruptCheckpoint on missing/truncated/unparseable files, VersionMismatch
// on a different format version.
Checkpoint load_checkpoint(const std::string& dir);

// Rebuilds the saved model. For a pretrain checkpoint the classifier is the
// seed's fresh initialization.
GleeModel restore_model(const Checkpoint& ckpt);

// Model to start finetuning from: N_a must match the manifest. The AU head
// is fresh after a pretrain checkpoint; with fresh_start the embedding
// network is re-initialized from the config seed as well.
GleeModel finetune_init(const Checkpoint& init, const TrainConfig& config, std::size_t au_count);

}  // namespace glee::train
