#pragma once

#include <string>

#include "glee/common/rng.hpp"
#include "glee/nn/ops.hpp"
#include "glee/nn/tape.hpp"

namespace glee::nn {

// Uniform(-bound, bound) fill.
void init_uniform(Tensor& t, Rng& rng, float bound);

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, bool with_bias, Rng& rng);

  Var forward(Tape& tape, Var x);
  void parameters(ParameterList& out);

  std::size_t in_features() const { return weight_.value.dim(1); }
  std::size_t out_features() const { return weight_.value.dim(0); }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  bool has_bias() const { return has_bias_; }

 private:
  Parameter weight_;
  Parameter bias_;
  bool has_bias_ = false;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, std::size_t in_channels, std::size_t out_channels,
         std::size_t kernel, std::size_t stride, std::size_t pad, Rng& rng);

  Var forward(Tape& tape, Var x);
  void parameters(ParameterList& out);

  std::size_t out_channels() const { return weight_.value.dim(0); }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }

 private:
  Parameter weight_;
  Parameter bias_;
  std::size_t stride_ = 1;
  std::size_t pad_ = 0;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t width);

  Var forward(Tape& tape, Var x);
  void parameters(ParameterList& out);

 private:
  Parameter gamma_;
  Parameter beta_;
};

}  // namespace glee::nn
