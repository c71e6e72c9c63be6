#pragma once

// Central finite-difference checks against the tape's reverse sweep.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "amc/autograd.hpp"
#include "amc/rng.hpp"

namespace amc::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t refined = 0;  // coordinates that needed a smaller step
  std::string worst;  // "<tensor>[<index>]: analytic vs numeric"
};

// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
// gradient is ~0 from turning FD round-off (~eps * |f| / h) into a huge ratio.
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline std::vector<std::size_t> sample_coords(std::size_t size, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(size);
  for (std::size_t i = 0; i < size; ++i) idx[i] = i;
  if (size <= count) return idx;
  rng.shuffle(idx);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline void note(GradCheck& r, const std::string& name, std::size_t i, double a, double n) {
  const double e = rel_error(a, n);
  ++r.checked;
  if (e >= r.max_rel_error) {
    r.max_rel_error = e;
    r.worst = name + "[" + std::to_string(i) + "]: " + std::to_string(a) + " vs " + std::to_string(n);
  }
}

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Checks d(build(inputs))/d(inputs) for every input tensor.
inline GradCheck check_inputs(const std::vector<Tensor>& inputs, const Builder& build,
                              std::size_t coords = 20, std::uint64_t seed = 1, double h = 1e-5) {
  auto eval = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& x : xs) leaves.push_back(tape.leaf(x));
    return build(tape, leaves).value()[0];
  };
  Tape tape;
  std::vector<Var> leaves;
  for (const auto& x : inputs) leaves.push_back(tape.leaf(x));
  tape.backward(build(tape, leaves));

  GradCheck r;
  Rng rng(seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = tape.grad(leaves[k]);
    for (std::size_t i : sample_coords(inputs[k].size(), coords, rng)) {
      std::vector<Tensor> xs = inputs;
      xs[k][i] = inputs[k][i] + h;
      const double up = eval(xs);
      xs[k][i] = inputs[k][i] - h;
      const double down = eval(xs);
      note(r, "input" + std::to_string(k), i, analytic[i], (up - down) / (2.0 * h));
    }
  }
  return r;
}

// Checks the gradients accumulated into `params` by `loss()`, which must record
// a fresh computation on the tape it is given each time it is called.
//
// Deep piecewise-linear networks put a kink (leaky ReLU, max-pool switch) within
// +-h of a sampled coordinate fairly often. A coordinate whose error at steps[0]
// exceeds `accept` is re-measured with the following, smaller steps; a genuine
// gradient error persists at every step.
inline GradCheck check_parameters(std::vector<Parameter>& params,
                                  const std::function<Var(Tape&)>& loss, std::size_t coords = 20,
                                  std::uint64_t seed = 1, std::vector<double> steps = {1e-5},
                                  double accept = 0.0) {
  for (auto& p : params) p.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  GradCheck r;
  Rng rng(seed);
  for (auto& p : params) {
    if (!p.trainable) continue;
    const Tensor analytic = p.grad;
    for (std::size_t i : sample_coords(p.value.size(), coords, rng)) {
      const double orig = p.value[i];
      double numeric = 0.0;
      for (std::size_t s = 0; s < steps.size(); ++s) {
        const double h = steps[s];
        p.value[i] = orig + h;
        Tape t1;
        const double up = loss(t1).value()[0];
        p.value[i] = orig - h;
        Tape t2;
        const double down = loss(t2).value()[0];
        numeric = (up - down) / (2.0 * h);
        if (rel_error(analytic[i], numeric) <= accept) break;
        if (s + 1 < steps.size() && s == 0) ++r.refined;
      }
      p.value[i] = orig;
      note(r, p.name, i, analytic[i], numeric);
    }
  }
  for (auto& p : params) p.zero_grad();
  return r;
}

}  // namespace amc::testing
