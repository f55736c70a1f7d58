#include "ftscope/autodiff.hpp"

#include "ftscope/error.hpp"

namespace ftscope {

const Tensor& Var::value() const {
  if (!tape_) throw Error("use of an unbound Var");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  value.check_finite("constant");
  return push(Node{std::move(value), {}, {}, false, "constant"});
}

Var Tape::parameter(Tensor value) {
  value.check_finite("parameter");
  return push(Node{std::move(value), {}, {}, grad_enabled_, "parameter"});
}

bool Tape::any_requires_grad(std::span<const Var> inputs) const {
  if (!grad_enabled_) return false;
  for (const Var& v : inputs) {
    if (v.tape() != this) throw Error("Var belongs to a different tape");
    if (nodes_[v.id()].requires_grad) return true;
  }
  return false;
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op) {
  value.check_finite(op);
  Node node;
  node.value = std::move(value);
  node.op = op;
  node.requires_grad = backward && any_requires_grad(inputs);
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape() != this) throw Error(std::string(op) + ": input Var belongs to a different tape");
    node.inputs.push_back(v.id());
  }
  if (node.requires_grad) node.backward = std::move(backward);
  return push(std::move(node));
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape() != this) throw Error("backward: loss belongs to a different tape");
  if (loss.value().size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  Gradients out;
  out.tape_ = this;
  out.grads_.resize(nodes_.size());
  out.grads_[loss.id()] = Tensor::full(loss.shape(), 1.0);

  std::vector<char> needs;
  std::vector<Tensor> input_grads;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    Tensor& g = out.grads_[i];
    if (g.empty() || !node.requires_grad || !node.backward) continue;
    needs.assign(node.inputs.size(), 0);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) needs[k] = nodes_[node.inputs[k]].requires_grad;
    input_grads.assign(node.inputs.size(), Tensor());
    node.backward(g, needs, input_grads);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      if (!needs[k] || input_grads[k].empty()) continue;
      const Tensor& in_value = nodes_[node.inputs[k]].value;
      if (input_grads[k].shape() != in_value.shape()) {
        throw ShapeError(std::string("backward of ") + node.op + " produced gradient of shape " +
                         shape_str(input_grads[k].shape()) + " for input of shape " +
                         shape_str(in_value.shape()));
      }
      input_grads[k].check_finite(node.op);
      accumulate(out.grads_[node.inputs[k]], input_grads[k]);
    }
  }
  return out;
}

Tensor Gradients::operator[](Var v) const {
  const Tensor& g = grads_.at(v.id());
  if (!g.empty()) return g;
  return Tensor::zeros(tape_->value(v.id()).shape());
}

void accumulate(Tensor& target, const Tensor& delta) {
  if (target.empty()) {
    target = delta;
    return;
  }
  if (target.shape() != delta.shape()) {
    throw ShapeError("accumulate: " + shape_str(target.shape()) + " vs " + shape_str(delta.shape()));
  }
  auto t = target.mutable_data();
  auto d = delta.data();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] += d[i];
}

}  // namespace ftscope
