#pragma once

// Straight-from-the-formula reference implementations for the loss tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "amc/rng.hpp"

namespace amc::testing {

inline double naive_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline std::vector<double> naive_unit(std::vector<double> x) {
  const double n = std::sqrt(naive_dot(x, x));
  for (auto& v : x) v /= n;
  return x;
}

inline double naive_amc(const std::vector<double>& zi, const std::vector<double>& zj, bool similar,
                        double mg) {
  const double theta = std::acos(std::min(std::max(naive_dot(zi, zj), -1.0 + 1e-7), 1.0 - 1e-7));
  if (similar) return theta * theta;
  const double h = std::max(0.0, mg - theta);
  return h * h;
}

inline double naive_eucd(const std::vector<double>& xi, const std::vector<double>& xj, bool similar,
                         double me) {
  double d2 = 0.0;
  for (std::size_t k = 0; k < xi.size(); ++k) d2 += (xi[k] - xj[k]) * (xi[k] - xj[k]);
  if (similar) return d2;
  const double h = std::max(0.0, me - std::sqrt(d2));
  return h * h;
}

inline std::vector<double> random_unit(std::size_t dim, Rng& rng) {
  std::vector<double> v(dim);
  for (auto& x : v) x = rng.normal();
  return naive_unit(v);
}

// Unit vector at exactly `theta` radians from unit vector `z` (dim >= 2).
inline std::vector<double> at_angle(const std::vector<double>& z, double theta, Rng& rng) {
  std::vector<double> u = random_unit(z.size(), rng);
  const double d = naive_dot(u, z);
  for (std::size_t k = 0; k < u.size(); ++k) u[k] -= d * z[k];
  u = naive_unit(u);
  std::vector<double> out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = std::cos(theta) * z[k] + std::sin(theta) * u[k];
  return out;
}

// Random orthogonal matrix as a product of Householder reflections, row-major.
inline std::vector<double> random_rotation(std::size_t dim, Rng& rng) {
  std::vector<double> q(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) q[i * dim + i] = 1.0;
  for (int r = 0; r < 3; ++r) {
    const std::vector<double> v = random_unit(dim, rng);
    std::vector<double> next(dim * dim);
    // (I - 2 v v^T) q
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) s += v[k] * q[k * dim + j];
        next[i * dim + j] = q[i * dim + j] - 2.0 * v[i] * s;
      }
    q = next;
  }
  return q;
}

inline std::vector<double> rotate(const std::vector<double>& q, const std::vector<double>& x) {
  const std::size_t dim = x.size();
  std::vector<double> y(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t k = 0; k < dim; ++k) y[i] += q[i * dim + k] * x[k];
  return y;
}

}  // namespace amc::testing
