#pragma once

#include <cmath>
#include <numbers>

namespace amc::testing {

// Two-sided Student-t tail by Simpson integration of the density over [0, |t|].
inline double t_two_sided_by_quadrature(double t, double df, int intervals = 200000) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * std::numbers::pi);
  auto f = [&](double x) { return c * std::pow(1.0 + x * x / df, -(df + 1) / 2); };
  const double b = std::abs(t), h = b / intervals;
  double s = f(0.0) + f(b);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return 1.0 - 2.0 * s * h / 3.0;
}

// Pooled two-sample t statistic from summary values.
inline double pooled_t(double m1, double s1, double n1, double m2, double s2, double n2) {
  const double sp2 = ((n1 - 1) * s1 * s1 + (n2 - 1) * s2 * s2) / (n1 + n2 - 2);
  return (m1 - m2) / std::sqrt(sp2 * (1 / n1 + 1 / n2));
}

}  // namespace amc::testing
