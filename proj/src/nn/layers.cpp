#include "glee/nn/layers.hpp"

#include <cmath>

namespace glee::nn {

void init_uniform(Tensor& t, Rng& rng, float bound) {
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, bool with_bias, Rng& rng)
    : weight_(name + ".weight", Tensor({out, in})),
      bias_(name + ".bias", Tensor({with_bias ? out : 0})),
      has_bias_(with_bias) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in));
  init_uniform(weight_.value, rng, bound);
  if (has_bias_) init_uniform(bias_.value, rng, bound);
}

Var Linear::forward(Tape& tape, Var x) {
  return linear(x, tape.parameter(weight_), has_bias_ ? tape.parameter(bias_) : Var{});
}

void Linear::parameters(ParameterList& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

Conv2d::Conv2d(const std::string& name, std::size_t in_channels, std::size_t out_channels,
               std::size_t kernel, std::size_t stride, std::size_t pad, Rng& rng)
    : weight_(name + ".weight", Tensor({out_channels, in_channels, kernel, kernel})),
      bias_(name + ".bias", Tensor({out_channels})),
      stride_(stride),
      pad_(pad) {
  // He-uniform for ReLU stacks; biases start at zero.
  const float fan_in = static_cast<float>(in_channels * kernel * kernel);
  init_uniform(weight_.value, rng, std::sqrt(6.0f / fan_in));
}

Var Conv2d::forward(Tape& tape, Var x) {
  return conv2d(x, tape.parameter(weight_), tape.parameter(bias_), stride_, pad_);
}

void Conv2d::parameters(ParameterList& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

LayerNorm::LayerNorm(const std::string& name, std::size_t width)
    : gamma_(name + ".gamma", Tensor({width}, 1.0f)), beta_(name + ".beta", Tensor({width})) {}

Var LayerNorm::forward(Tape& tape, Var x) {
  return layer_norm(x, tape.parameter(gamma_), tape.parameter(beta_));
}

void LayerNorm::parameters(ParameterList& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

}  // namespace glee::nn
