#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "glee/au/loss.hpp"
#include "glee/morph/coeffs.hpp"
#include "glee/morph/model.hpp"
#include "glee/train/config.hpp"
#include "glee/train/manifest.hpp"
#include "glee/train/model.hpp"

namespace glee::train {

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  // Training-set average F1 after the epoch (finetuning with early stop).
  double train_f1 = -1.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct StepLog {
  std::size_t epoch = 0;
  std::size_t step = 0;  // optimizer steps so far, across epochs
};
// Called after every optimizer step.
using StepCallback = std::function<void(const StepLog&)>;

struct TrainResult {
  std::vector<double> loss_history;  // per-epoch mean loss
  std::vector<double> train_f1_history;
  bool stopped_early = false;
};

// Triplet pretraining of the face model, reducer and local branch. Each
// batch embeds every distinct image once, takes the batch-mean loss
// gradient with respect to those embeddings, then backpropagates image by
// image. Throws ValidationError on an empty manifest and NumericalError on
// a non-finite loss.
TrainResult pretrain(GleeModel& model, const TripletManifest& triplets, const TrainConfig& config,
                     const EpochCallback& on_epoch = {}, const StepCallback& on_step = {});

// Fraction of triplets with d(A,P) < d(A,N) on normalized E_exp.
double ranking_accuracy(GleeModel& model, const TripletManifest& triplets);

// f_exp per frame for a manifest; missing entries are an error naming the
// frame.
std::vector<std::vector<double>> lookup_coefficients(const AUManifest& data,
                                                     const morph::CoefficientTable& table);

// End-to-end AU training under total_loss. The identity model never moves;
// with fixed_branches the whole embedding network is held fixed.
TrainResult finetune(GleeModel& model, const AUManifest& data,
                     const morph::CoefficientTable& coefficients, const au::DatasetStats& stats,
                     const TrainConfig& config, const EpochCallback& on_epoch = {},
                     const StepCallback& on_step = {});

// r_i = max(count_i / N, 1e-3).
au::DatasetStats compute_stats(const AUManifest& data);

struct Fold {
  std::vector<std::string> test_subjects;
  AUManifest train;
  AUManifest test;
};

// Subjects ordered by a seeded hash of their id, dealt round-robin into k
// test groups.
std::vector<Fold> make_folds(const AUManifest& data, std::size_t k, std::uint64_t seed);

// Fits every frame's landmarks. A frame whose fit throws gets zero
// coefficients and a failure status instead.
std::vector<morph::CoefficientRow> precompute_coefficients(const AUManifest& data,
                                                           const morph::MorphableModel& model,
                                                           const morph::FitConfig& config);

}  // namespace glee::train
