#include "amc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "gemm.hpp"

namespace amc {

namespace {

struct ConvGeometry {
  std::size_t n, c, h, w;   // input
  std::size_t k_out, ksize;  // kernel
  std::size_t pad;
  std::size_t ho, wo;
  std::size_t patch() const { return c * ksize * ksize; }
  std::size_t plane() const { return ho * wo; }
};

// Columns of `col` are output positions of images [n0, n1); rows are (c, i, j) taps.
void im2col(const double* x, const ConvGeometry& g, std::size_t n0, std::size_t n1,
            std::vector<double>& col) {
  const std::size_t cols = (n1 - n0) * g.plane();
  col.assign(g.patch() * cols, 0.0);
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.ksize; ++i) {
      for (std::size_t j = 0; j < g.ksize; ++j) {
        double* row = col.data() + ((c * g.ksize + i) * g.ksize + j) * cols;
        const std::ptrdiff_t di = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(g.pad);
        const std::ptrdiff_t dj = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(g.pad);
        const std::size_t ow_lo = dj < 0 ? static_cast<std::size_t>(-dj) : 0;
        const std::size_t ow_hi =
            std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(g.wo),
                                     static_cast<std::ptrdiff_t>(g.w) - dj);
        if (ow_hi <= ow_lo) continue;
        for (std::size_t n = n0; n < n1; ++n) {
          const double* plane = x + (n * g.c + c) * g.h * g.w;
          double* dst = row + (n - n0) * g.plane();
          for (std::size_t oh = 0; oh < g.ho; ++oh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) + di;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
            const double* src = plane + static_cast<std::size_t>(ih) * g.w;
            std::memcpy(dst + oh * g.wo + ow_lo,
                        src + static_cast<std::ptrdiff_t>(ow_lo) + dj,
                        (ow_hi - ow_lo) * sizeof(double));
          }
        }
      }
    }
  }
}

void col2im_add(const std::vector<double>& col, const ConvGeometry& g, std::size_t n0,
                std::size_t n1, double* dx) {
  const std::size_t cols = (n1 - n0) * g.plane();
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t i = 0; i < g.ksize; ++i) {
      for (std::size_t j = 0; j < g.ksize; ++j) {
        const double* row = col.data() + ((c * g.ksize + i) * g.ksize + j) * cols;
        const std::ptrdiff_t di = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(g.pad);
        const std::ptrdiff_t dj = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(g.pad);
        const std::size_t ow_lo = dj < 0 ? static_cast<std::size_t>(-dj) : 0;
        const std::size_t ow_hi =
            std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(g.wo),
                                     static_cast<std::ptrdiff_t>(g.w) - dj);
        if (ow_hi <= ow_lo) continue;
        for (std::size_t n = n0; n < n1; ++n) {
          double* plane = dx + (n * g.c + c) * g.h * g.w;
          const double* src = row + (n - n0) * g.plane();
          for (std::size_t oh = 0; oh < g.ho; ++oh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh) + di;
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
            double* dst = plane + static_cast<std::size_t>(ih) * g.w;
            for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
              dst[static_cast<std::ptrdiff_t>(ow) + dj] += src[oh * g.wo + ow];
          }
        }
      }
    }
  }
}

// Images per GEMM: keep the column buffer around 4M doubles.
std::size_t conv_chunk(const ConvGeometry& g) {
  const std::size_t per_image = g.patch() * g.plane();
  return std::clamp<std::size_t>((std::size_t{1} << 22) / std::max<std::size_t>(per_image, 1), 1,
                                 g.n);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

}  // namespace

namespace ops {

Var conv2d(Var input, Var kernel, std::optional<Var> bias, Padding padding) {
  const Tensor& x = input.value();
  const Tensor& w = kernel.value();
  require_rank(x, 4, "conv2d input");
  require_rank(w, 4, "conv2d kernel");
  ConvGeometry g{};
  g.n = x.dim(0);
  g.c = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.k_out = w.dim(0);
  g.ksize = w.dim(2);
  if (w.dim(1) != g.c)
    throw ShapeError("conv2d: kernel expects " + std::to_string(w.dim(1)) +
                     " input channels, input has " + std::to_string(g.c));
  if (w.dim(3) != g.ksize || (g.ksize != 1 && g.ksize != 3))
    throw ShapeError("conv2d: kernel must be 3x3 or 1x1, got " + to_string(w.shape()));
  g.pad = padding == Padding::same ? (g.ksize - 1) / 2 : 0;
  if (g.h + 2 * g.pad < g.ksize || g.w + 2 * g.pad < g.ksize)
    throw ShapeError("conv2d: input " + to_string(x.shape()) + " smaller than kernel");
  g.ho = g.h + 2 * g.pad - g.ksize + 1;
  g.wo = g.w + 2 * g.pad - g.ksize + 1;
  if (bias && bias->value().shape() != Shape{g.k_out})
    throw ShapeError("conv2d: bias must have shape [" + std::to_string(g.k_out) + "]");

  Tape* tape = input.tape();
  const Precision precision = tape->precision();
  Tensor y(Shape{g.n, g.k_out, g.ho, g.wo});
  const std::size_t chunk = conv_chunk(g);
  std::vector<double> col;
  std::vector<double> tmp;
  for (std::size_t n0 = 0; n0 < g.n; n0 += chunk) {
    const std::size_t n1 = std::min(g.n, n0 + chunk);
    const std::size_t cols = (n1 - n0) * g.plane();
    im2col(x.ptr(), g, n0, n1, col);
    tmp.assign(g.k_out * cols, 0.0);
    detail::gemm(precision, w.ptr(), false, col.data(), false, tmp.data(), g.k_out, cols,
                 g.patch(), false);
    for (std::size_t n = n0; n < n1; ++n)
      for (std::size_t k = 0; k < g.k_out; ++k) {
        const double b = bias ? bias->value()[k] : 0.0;
        const double* src = tmp.data() + k * cols + (n - n0) * g.plane();
        double* dst = y.ptr() + (n * g.k_out + k) * g.plane();
        for (std::size_t p = 0; p < g.plane(); ++p) dst[p] = src[p] + b;
      }
  }

  std::vector<Var> inputs{input, kernel};
  if (bias) inputs.push_back(*bias);
  return tape->record(
      "conv2d", std::move(y), inputs,
      [input, kernel, g, precision](const Tensor& dy, std::span<Tensor* const> grads) {
        const Tensor& xv = input.value();
        const Tensor& wv = kernel.value();
        Tensor* dx = grads[0];
        Tensor* dw = grads[1];
        Tensor* db = grads.size() > 2 ? grads[2] : nullptr;
        const std::size_t chunk = conv_chunk(g);
        std::vector<double> col;
        std::vector<double> dyc;
        for (std::size_t n0 = 0; n0 < g.n; n0 += chunk) {
          const std::size_t n1 = std::min(g.n, n0 + chunk);
          const std::size_t cols = (n1 - n0) * g.plane();
          dyc.resize(g.k_out * cols);
          for (std::size_t n = n0; n < n1; ++n)
            for (std::size_t k = 0; k < g.k_out; ++k)
              std::memcpy(dyc.data() + k * cols + (n - n0) * g.plane(),
                          dy.ptr() + (n * g.k_out + k) * g.plane(), g.plane() * sizeof(double));
          if (db)
            for (std::size_t k = 0; k < g.k_out; ++k) {
              double s = 0.0;
              for (std::size_t p = 0; p < cols; ++p) s += dyc[k * cols + p];
              (*db)[k] += s;
            }
          if (dw) {
            im2col(xv.ptr(), g, n0, n1, col);
            detail::gemm(precision, dyc.data(), false, col.data(), true, dw->ptr(), g.k_out,
                         g.patch(), cols, true);
          }
          if (dx) {
            col.assign(g.patch() * cols, 0.0);
            detail::gemm(precision, wv.ptr(), true, dyc.data(), false, col.data(), g.patch(),
                         cols, g.k_out, false);
            col2im_add(col, g, n0, n1, dx->ptr());
          }
        }
      });
}

Var maxpool2x2(Var input) {
  const Tensor& x = input.value();
  require_rank(x, 4, "maxpool2x2");
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2)
    throw ShapeError("maxpool2x2: spatial dims must be even, got " + to_string(x.shape()));
  const std::size_t ho = h / 2, wo = w / 2;
  Tensor y(Shape{n, c, ho, wo});
  std::vector<std::size_t> argmax(y.size());
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < n * c; ++nc) {
    const std::size_t base = nc * h * w;
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j, ++o) {
        std::size_t best = base + (2 * i) * w + 2 * j;
        const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
        for (auto idx : cand)
          if (x[idx] > x[best]) best = idx;
        y[o] = x[best];
        argmax[o] = best;
      }
  }
  return input.tape()->record("maxpool2x2", std::move(y), {input},
                              [argmax = std::move(argmax)](const Tensor& dy,
                                                           std::span<Tensor* const> grads) {
                                Tensor& dx = *grads[0];
                                for (std::size_t k = 0; k < argmax.size(); ++k)
                                  dx[argmax[k]] += dy[k];
                              });
}

Var global_avg_pool(Var input) {
  const Tensor& x = input.value();
  require_rank(x, 4, "global_avg_pool");
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor y(Shape{n, c});
  for (std::size_t k = 0; k < n * c; ++k) {
    double s = 0.0;
    for (std::size_t p = 0; p < hw; ++p) s += x[k * hw + p];
    y[k] = s / static_cast<double>(hw);
  }
  return input.tape()->record("global_avg_pool", std::move(y), {input},
                              [hw](const Tensor& dy, std::span<Tensor* const> grads) {
                                Tensor& dx = *grads[0];
                                const double inv = 1.0 / static_cast<double>(hw);
                                for (std::size_t k = 0; k < dy.size(); ++k)
                                  for (std::size_t p = 0; p < hw; ++p) dx[k * hw + p] += dy[k] * inv;
                              });
}

Var dense(Var input, Var weight, Var bias) {
  const Tensor& x = input.value();
  const Tensor& w = weight.value();
  require_rank(x, 2, "dense input");
  require_rank(w, 2, "dense weight");
  const std::size_t n = x.dim(0), d = x.dim(1), k = w.dim(1);
  if (w.dim(0) != d)
    throw ShapeError("dense: input width " + std::to_string(d) + " does not match weight " +
                     to_string(w.shape()));
  if (bias.value().shape() != Shape{k})
    throw ShapeError("dense: bias must have shape [" + std::to_string(k) + "]");
  Tape* tape = input.tape();
  const Precision precision = tape->precision();
  Tensor y(Shape{n, k});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) y.at(i, j) = bias.value()[j];
  detail::gemm(precision, x.ptr(), false, w.ptr(), false, y.ptr(), n, k, d, true);
  return tape->record(
      "dense", std::move(y), {input, weight, bias},
      [input, weight, n, d, k, precision](const Tensor& dy, std::span<Tensor* const> grads) {
        if (grads[0])
          detail::gemm(precision, dy.ptr(), false, weight.value().ptr(), true, grads[0]->ptr(), n,
                       d, k, true);
        if (grads[1])
          detail::gemm(precision, input.value().ptr(), true, dy.ptr(), false, grads[1]->ptr(), d,
                       k, n, true);
        if (grads[2])
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < k; ++j) (*grads[2])[j] += dy.at(i, j);
      });
}

Var leaky_relu(Var input, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("leaky_relu: alpha must be in (0,1)");
  Tensor y = input.value();
  for (auto& v : y.data())
    if (!(v > 0.0)) v *= alpha;
  return input.tape()->record("leaky_relu", std::move(y), {input},
                              [input, alpha](const Tensor& dy, std::span<Tensor* const> grads) {
                                const Tensor& x = input.value();
                                Tensor& dx = *grads[0];
                                for (std::size_t i = 0; i < dy.size(); ++i)
                                  dx[i] += x[i] > 0.0 ? dy[i] : alpha * dy[i];
                              });
}

Var batch_norm(Var input, Var gamma, Var beta, BatchNormState& state, Mode mode) {
  const Tensor& x = input.value();
  if (x.rank() != 4 && x.rank() != 2)
    throw ShapeError("batch_norm: expected NCHW or NC input, got " + to_string(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t hw = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  if (gamma.value().shape() != Shape{c} || beta.value().shape() != Shape{c})
    throw ShapeError("batch_norm: gamma/beta must have shape [" + std::to_string(c) + "]");
  if (state.running_mean.shape() != Shape{c})
    throw ShapeError("batch_norm: running statistics sized for a different channel count");
  if (mode == Mode::train && n < 2)
    throw ShapeError("batch_norm: train mode needs a batch of at least 2");

  const double m = static_cast<double>(n * hw);
  std::vector<double> mean(c), inv_std(c);
  if (mode == Mode::train) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < hw; ++p) s += x[(i * c + ch) * hw + p];
      const double mu = s / m;
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < hw; ++p) {
          const double d = x[(i * c + ch) * hw + p] - mu;
          ss += d * d;
        }
      const double var = ss / m;
      mean[ch] = mu;
      inv_std[ch] = 1.0 / std::sqrt(var + state.eps);
      state.running_mean[ch] = state.momentum * state.running_mean[ch] + (1.0 - state.momentum) * mu;
      state.running_var[ch] =
          state.momentum * state.running_var[ch] + (1.0 - state.momentum) * var * m / (m - 1.0);
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(state.running_var[ch] + state.eps);
    }
  }

  const Tensor& g = gamma.value();
  const Tensor& b = beta.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t idx = (i * c + ch) * hw + p;
        y[idx] = g[ch] * (x[idx] - mean[ch]) * inv_std[ch] + b[ch];
      }

  const bool batch_stats = mode == Mode::train;
  return input.tape()->record(
      "batch_norm", std::move(y), {input, gamma, beta},
      [input, gamma, n, c, hw, m, batch_stats, mean = std::move(mean),
       inv_std = std::move(inv_std)](const Tensor& dy, std::span<Tensor* const> grads) {
        const Tensor& xv = input.value();
        const Tensor& gv = gamma.value();
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < hw; ++p) {
              const std::size_t idx = (i * c + ch) * hw + p;
              const double xhat = (xv[idx] - mean[ch]) * inv_std[ch];
              sum_dy += dy[idx];
              sum_dy_xhat += dy[idx] * xhat;
            }
          if (grads[1]) (*grads[1])[ch] += sum_dy_xhat;
          if (grads[2]) (*grads[2])[ch] += sum_dy;
          if (!grads[0]) continue;
          Tensor& dx = *grads[0];
          const double k = gv[ch] * inv_std[ch];
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < hw; ++p) {
              const std::size_t idx = (i * c + ch) * hw + p;
              if (batch_stats) {
                const double xhat = (xv[idx] - mean[ch]) * inv_std[ch];
                dx[idx] += k / m * (m * dy[idx] - sum_dy - xhat * sum_dy_xhat);
              } else {
                dx[idx] += k * dy[idx];
              }
            }
        }
      });
}

Var dropout(Var input, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout: rate must be in [0,1)");
  if (mode == Mode::eval || rate == 0.0) return input;
  const double keep_scale = 1.0 / (1.0 - rate);
  Tensor mask(input.shape());
  for (auto& v : mask.data()) v = rng.uniform() < rate ? 0.0 : keep_scale;
  Tensor y = input.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return input.tape()->record("dropout", std::move(y), {input},
                              [mask = std::move(mask)](const Tensor& dy,
                                                       std::span<Tensor* const> grads) {
                                Tensor& dx = *grads[0];
                                for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i] * mask[i];
                              });
}

Var gaussian_noise(Var input, double sigma, Mode mode, Rng& rng) {
  if (!(sigma >= 0.0)) throw ConfigError("gaussian_noise: sigma must be >= 0");
  if (mode == Mode::eval || sigma == 0.0) return input;
  Tensor y = input.value();
  for (auto& v : y.data()) v += sigma * rng.normal();
  return input.tape()->record("gaussian_noise", std::move(y), {input},
                              [](const Tensor& dy, std::span<Tensor* const> grads) {
                                grads[0]->add_(dy);
                              });
}

Var softmax(Var logits) {
  Tensor y = softmax_rows(logits.value());
  Tensor saved = y;
  return logits.tape()->record(
      "softmax", std::move(y), {logits},
      [saved = std::move(saved)](const Tensor& dy, std::span<Tensor* const> grads) {
        Tensor& dx = *grads[0];
        const std::size_t n = saved.dim(0), c = saved.dim(1);
        for (std::size_t i = 0; i < n; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < c; ++j) dot += dy.at(i, j) * saved.at(i, j);
          for (std::size_t j = 0; j < c; ++j) dx.at(i, j) += saved.at(i, j) * (dy.at(i, j) - dot);
        }
      });
}

Var sum(Var input) {
  double s = 0.0;
  for (double v : input.value().data()) s += v;
  return input.tape()->record("sum", Tensor::scalar(s), {input},
                              [](const Tensor& dy, std::span<Tensor* const> grads) {
                                for (auto& v : grads[0]->data()) v += dy[0];
                              });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  y.add_(b.value());
  return a.tape()->record("add", std::move(y), {a, b},
                          [](const Tensor& dy, std::span<Tensor* const> grads) {
                            if (grads[0]) grads[0]->add_(dy);
                            if (grads[1]) grads[1]->add_(dy);
                          });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return a.tape()->record("mul", std::move(y), {a, b},
                          [a, b](const Tensor& dy, std::span<Tensor* const> grads) {
                            const Tensor& av = a.value();
                            const Tensor& bv = b.value();
                            if (grads[0])
                              for (std::size_t i = 0; i < dy.size(); ++i) (*grads[0])[i] += dy[i] * bv[i];
                            if (grads[1])
                              for (std::size_t i = 0; i < dy.size(); ++i) (*grads[1])[i] += dy[i] * av[i];
                          });
}

Var scale(Var input, double factor) {
  Tensor y = input.value();
  y.scale_(factor);
  return input.tape()->record("scale", std::move(y), {input},
                              [factor](const Tensor& dy, std::span<Tensor* const> grads) {
                                Tensor& dx = *grads[0];
                                for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += factor * dy[i];
                              });
}

Var pick(Var input, std::size_t flat_index) {
  if (flat_index >= input.value().size()) throw ShapeError("pick: index out of range");
  return input.tape()->record("pick", Tensor::scalar(input.value()[flat_index]), {input},
                              [flat_index](const Tensor& dy, std::span<Tensor* const> grads) {
                                (*grads[0])[flat_index] += dy[0];
                              });
}

}  // namespace ops

Tensor softmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "softmax");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (c < 2) throw ShapeError("softmax: need at least 2 classes");
  Tensor y(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = std::exp(logits.at(i, j) - mx);
      y.at(i, j) = e;
      s += e;
    }
    for (std::size_t j = 0; j < c; ++j) y.at(i, j) /= s;
  }
  return y;
}

}  // namespace amc
