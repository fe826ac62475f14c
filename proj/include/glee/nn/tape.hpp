#pragma once

// Reverse-mode autodiff over float tensors. A Tape records one forward pass;
// each op appends a node holding its value and a backward closure. Nodes are
// stored in a deque so references to values stay valid while recording.

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "glee/nn/tensor.hpp"

namespace glee::nn {

struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;
  Tensor velocity;
  bool frozen = false;

  void zero_grad();
};

using ParameterList = std::vector<Parameter*>;

class Tape;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  bool valid() const noexcept { return tape_ != nullptr; }
  int id() const noexcept { return id_; }
  Tape& tape() const { return *tape_; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);

  // Frozen parameters enter the graph as constants; trainable ones
  // accumulate directly into Parameter::grad during backward().
  Var parameter(Parameter& p);

  // Appends an op result. The node requires grad iff any input does; the
  // closure is dropped otherwise.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Tensor value, const std::vector<Var>& inputs, Backward backward);

  // Root must hold a single element; it is seeded with 1.
  void backward(Var root);
  void backward(Var root, const Tensor& seed);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  // Upstream gradient of a node during backward (empty if none arrived).
  const Tensor& grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

  // Gradient accumulator of an input, zero-allocated on first use; nullptr
  // when the input does not require grad.
  Tensor* grad_sink(int id);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;
};

}  // namespace glee::nn
