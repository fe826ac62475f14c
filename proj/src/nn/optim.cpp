#include "glee/nn/optim.hpp"

namespace glee::nn {

Sgd::Sgd(ParameterList params, SgdConfig config) : params_(std::move(params)), config_(config) {}

void Sgd::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Sgd::step(float grad_scale) {
  const float lr = static_cast<float>(config_.learning_rate);
  const float mu = static_cast<float>(config_.momentum);
  for (Parameter* p : params_) {
    if (p->frozen) continue;
    if (p->velocity.shape() != p->value.shape()) p->velocity = Tensor(p->value.shape());
    float* w = p->value.data();
    float* v = p->velocity.data();
    const float* g = p->grad.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      v[i] = mu * v[i] + grad_scale * g[i];
      w[i] -= lr * v[i];
    }
  }
}

}  // namespace glee::nn
