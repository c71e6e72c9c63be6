#pragma once

#include <cstddef>
#include <optional>

#include "amc/autograd.hpp"
#include "amc/rng.hpp"

namespace amc {

enum class Mode { train, eval };
enum class Padding { same, valid };

/// Running statistics owned by a batch-norm layer.
struct BatchNormState {
  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(Shape{channels ? channels : 1}, 0.0),
        running_var(Shape{channels ? channels : 1}, 1.0) {}

  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.9;
  double eps = 1e-5;
};

namespace ops {

/// 2-D convolution over NCHW input with a KxCxkxk kernel, k in {1, 3}.
/// `bias`, when given, has shape [K].
Var conv2d(Var input, Var kernel, std::optional<Var> bias, Padding padding);

/// Non-overlapping 2x2 max pooling; ties go to the first cell in row-major order.
Var maxpool2x2(Var input);

/// NCHW -> NC mean over the spatial axes.
Var global_avg_pool(Var input);

/// x[N,D] * W[D,K] + b[K].
Var dense(Var input, Var weight, Var bias);

/// x for x > 0, alpha * x otherwise (slope alpha at exactly 0).
Var leaky_relu(Var input, double alpha);

/// Per-channel batch normalisation for NCHW or NC input. Train mode uses batch
/// statistics (biased variance) and updates `state`; eval mode uses the running
/// statistics.
Var batch_norm(Var input, Var gamma, Var beta, BatchNormState& state, Mode mode);

/// Inverted dropout: survivors scaled by 1/(1-rate) in train mode, identity in eval.
Var dropout(Var input, double rate, Mode mode, Rng& rng);

/// Adds N(0, sigma^2) noise in train mode; identity in eval.
Var gaussian_noise(Var input, double sigma, Mode mode, Rng& rng);

/// Row-wise softmax over NC logits with max subtraction.
Var softmax(Var logits);

Var sum(Var input);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var input, double factor);
/// Scalar element at a flat row-major offset.
Var pick(Var input, std::size_t flat_index);

}  // namespace ops

/// Plain (non-differentiable) row softmax, used for predictions.
Tensor softmax_rows(const Tensor& logits);

}  // namespace amc
