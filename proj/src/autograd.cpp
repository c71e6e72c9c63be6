#include "amc/autograd.hpp"

namespace amc {

Parameter::Parameter(std::string name_, Tensor value_, bool trainable_)
    : name(std::move(name_)), value(std::move(value_)), trainable(trainable_) {
  grad = Tensor(value.shape(), 0.0);
}

const Tensor& Var::value() const {
  if (!tape_) throw Error("use of an unbound Var");
  return tape_->value(*this);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.op = "leaf";
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.op = "param:" + p.name;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = p.trainable;
  return push(std::move(n));
}

Var Tape::record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  if (!value.all_finite())
    throw NumericError(std::string("non-finite value produced by ") + op);
  Node n;
  n.op = op;
  n.value = std::move(value);
  for (const auto& in : inputs) {
    if (in.tape() != this) throw Error(std::string(op) + ": input recorded on another tape");
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw Error("backward: loss belongs to another tape");
  if (value(loss).size() != 1)
    throw ShapeError("backward: loss must be scalar, got " + to_string(value(loss).shape()));
  for (auto& n : nodes_) n.grad = Tensor();
  nodes_[loss.id()].grad = Tensor(nodes_[loss.id()].value.shape(), 1.0);

  std::vector<Tensor*> slots;
  for (std::size_t k = loss.id() + 1; k-- > 0;) {
    Node& node = nodes_[k];
    if (node.grad.empty()) continue;
    if (node.backward) {
      slots.clear();
      for (auto in : node.inputs) {
        Node& src = nodes_[in];
        if (!src.requires_grad) {
          slots.push_back(nullptr);
          continue;
        }
        if (src.grad.empty()) src.grad = Tensor(src.value.shape(), 0.0);
        slots.push_back(&src.grad);
      }
      node.backward(node.grad, slots);
    }
    if (node.param && node.param->trainable) node.param->grad.add_(node.grad);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id());
  if (n.grad.empty()) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

}  // namespace amc
