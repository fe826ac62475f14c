#pragma once

#include <span>
#include <vector>

#include "glee/au/classifier.hpp"
#include "glee/nn/tape.hpp"

namespace glee::au {

inline constexpr double kProbabilityClip = 1e-7;
inline constexpr double kRatioClamp = 1e-3;

struct DatasetStats {
  std::vector<double> r;
  double epsilon_clamp = kRatioClamp;

  // Throws ValidationError unless every r_i lies in [epsilon_clamp, 1].
  void validate() const;
};

// L = -(1/N_a) sum_i (1/r_i) [g_i ln p_i + (1 - g_i) ln(1 - p_i)], with p
// clipped to [1e-7, 1 - 1e-7] first.
double weighted_ce(std::span<const double> probs, std::span<const int> labels,
                   const DatasetStats& stats);

// Same loss on pre-sigmoid logits. grad, if given, receives dL/dz (zero for
// entries whose probability was clipped).
double weighted_ce_logits(std::span<const double> logits, std::span<const int> labels,
                          const DatasetStats& stats, std::vector<double>* grad = nullptr);

// Tape op: [N_a] logits -> [1] loss.
nn::Var weighted_ce(nn::Var logits, std::span<const int> labels, const DatasetStats& stats);

// weighted_ce(initial) + weighted_ce(final).
double total_loss(const AUPrediction& pred, std::span<const int> labels,
                  const DatasetStats& stats);
nn::Var total_loss(const ClassifierVars& vars, std::span<const int> labels,
                   const DatasetStats& stats);

}  // namespace glee::au
