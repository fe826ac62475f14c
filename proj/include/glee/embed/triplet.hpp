#pragma once

#include <span>
#include <vector>

#include "glee/nn/tape.hpp"

namespace glee::embed {

struct TripletGrad {
  std::vector<double> anchor, positive, negative;
};

// Each input is scaled to unit L2 norm, then
//   L = max(0, d(A,P) - d(A,N) + m) + max(0, d(A,P) - d(P,N) + m)
// with d the squared Euclidean distance. Throws NumericalError on a
// zero-norm or non-finite input and ConfigError when m <= 0. When grad is
// given it receives dL/dA, dL/dP, dL/dN (hinges at exactly zero count as
// inactive).
double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const double> negative, double margin,
                    TripletGrad* grad = nullptr);

// Tape op over three [D] embeddings; returns a [1] loss.
nn::Var triplet_loss(nn::Var anchor, nn::Var positive, nn::Var negative, double margin);

}  // namespace glee::embed
