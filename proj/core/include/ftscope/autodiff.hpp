#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ftscope/tensor.hpp"

namespace ftscope {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Backward rule of one recorded op. `grad_out` is dL/d(output). For each input i
/// with needs[i] set, the rule writes dL/d(input i) into grads[i] (same shape as
/// the input). Inputs it leaves empty receive no contribution.
using BackwardFn =
    std::function<void(const Tensor& grad_out, std::span<const char> needs, std::span<Tensor> grads)>;

class Gradients;

/// Append-only record of a computation. Nodes are stored in creation order, so
/// inputs always precede the nodes that consume them. A tape belongs to a single
/// thread.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Tensor value);
  /// Leaf whose gradient is tracked (when the tape has gradients enabled).
  Var parameter(Tensor value);

  /// Records an op output. `value` is checked for NaN/Inf and `op` names the op
  /// in the resulting error. `backward` may be empty for non-differentiable ops.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op);

  /// True when any of `inputs` carries gradient, i.e. the op must record a rule.
  bool any_requires_grad(std::span<const Var> inputs) const;

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a single-element loss.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    const char* op = "";
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  bool grad_enabled_;
};

/// Result of Tape::backward: dL/dv for every recorded value.
class Gradients {
 public:
  /// Gradient with respect to `v`; zeros if the loss does not depend on it.
  Tensor operator[](Var v) const;
  bool touched(Var v) const { return !grads_.at(v.id()).empty(); }

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<Tensor> grads_;
};

/// grads[i] += delta, allocating on first contribution.
void accumulate(Tensor& target, const Tensor& delta);

}  // namespace ftscope
