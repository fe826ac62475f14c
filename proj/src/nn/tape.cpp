#include "glee/nn/tape.hpp"

#include "glee/common/error.hpp"
#include "glee/kernels/kernels.hpp"

namespace glee::nn {

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape()), velocity(value.shape()) {}

void Parameter::zero_grad() { grad.fill(0.0f); }

const Tensor& Var::value() const { return tape_->value(id_); }

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::parameter(Parameter& p) {
  const bool trainable = !p.frozen;
  nodes_.push_back(Node{p.value, {}, {}, trainable ? &p : nullptr, trainable});
  if (trainable && p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, Backward backward) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape_ != this) throw std::logic_error("op input recorded on a different tape");
    needs = needs || in.requires_grad();
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, nullptr,
                        needs});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Tensor* Tape::grad_sink(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return nullptr;
  if (n.param != nullptr) return &n.param->grad;
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
  return &n.grad;
}

void Tape::backward(Var root) {
  if (root.value().size() != 1) {
    throw std::logic_error("backward() without seed needs a single-element root, got " +
                           to_string(root.shape()));
  }
  backward(root, Tensor(root.shape(), 1.0f));
}

void Tape::backward(Var root, const Tensor& seed) {
  if (root.tape_ != this) throw std::logic_error("root belongs to another tape");
  if (seed.shape() != root.shape()) throw std::logic_error("seed shape mismatch");
  if (!root.requires_grad()) return;
  if (Tensor* g = grad_sink(root.id())) {
    kernels::active().axpy(1.0f, seed.data(), g->data(), seed.size());
  }
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
    n.grad = Tensor();
  }
}

}  // namespace glee::nn
