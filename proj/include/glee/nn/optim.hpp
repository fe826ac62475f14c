#pragma once

#include "glee/nn/tape.hpp"

namespace glee::nn {

struct SgdConfig {
  double learning_rate = 2e-4;
  double momentum = 0.9;
};

// Heavy-ball SGD: v <- momentum * v + g; w <- w - lr * v. Frozen parameters
// are skipped entirely.
class Sgd {
 public:
  Sgd(ParameterList params, SgdConfig config);

  void zero_grad();

  // Applies one update with gradients multiplied by grad_scale first (use
  // 1/batch for a batch mean).
  void step(float grad_scale = 1.0f);

  const SgdConfig& config() const { return config_; }

 private:
  ParameterList params_;
  SgdConfig config_;
};

}  // namespace glee::nn
