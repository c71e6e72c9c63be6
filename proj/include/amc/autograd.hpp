#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "amc/tensor.hpp"

namespace amc {

/// A trainable tensor together with its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value, bool trainable = true);

  std::string name;
  Tensor value;
  Tensor grad;  // always value.shape()
  bool trainable = true;

  void zero_grad() { grad.fill(0.0); }
};

/// Precision used inside the matrix-multiply kernels. Tensors always store fp64;
/// fp32 only changes the GEMM inner loops and is meant for training throughput.
enum class Precision { fp64, fp32 };

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Receives the upstream gradient and one slot per input. A slot is nullptr when
/// that input does not require a gradient; otherwise it is a zero-initialised or
/// partially accumulated buffer of the input's shape to add into.
using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> input_grads)>;

/// Records operations in execution order and replays them in reverse to
/// accumulate gradients. Not thread-safe; use one tape per thread.
class Tape {
 public:
  explicit Tape(Precision precision = Precision::fp64) : precision_(precision) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Precision precision() const { return precision_; }

  /// Leaf that never receives a gradient (data, labels).
  Var constant(Tensor value);
  /// Leaf that receives a gradient, readable via grad() after backward().
  Var leaf(Tensor value);
  /// Leaf bound to a Parameter; backward() adds into parameter.grad when trainable.
  Var parameter(Parameter& p);

  /// Appends an op node. `op` names the node in diagnostics. Throws NumericError
  /// if the value contains NaN/Inf.
  Var record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  /// Reverse sweep from a scalar node. Clears node gradients from any previous sweep.
  void backward(Var loss);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  /// Gradient from the last backward(); zeros if the node was not reached.
  Tensor grad(Var v) const;
  const std::string& op_name(Var v) const { return nodes_.at(v.id()).op; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;  // empty until reached in backward
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  Precision precision_;
};

}  // namespace amc
