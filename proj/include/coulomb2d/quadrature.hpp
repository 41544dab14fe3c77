#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>

namespace coulomb2d {

template <std::size_t N>
struct GaussLegendreRule {
  std::array<double, N> nodes{};
  std::array<double, N> weights{};
};

/// N-point Gauss-Legendre rule on [-1, 1], computed once by Newton iteration
/// on the Legendre recurrence.
template <std::size_t N>
const GaussLegendreRule<N>& gauss_legendre() {
  static const GaussLegendreRule<N> rule = [] {
    GaussLegendreRule<N> r;
    const std::size_t half = (N + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
      double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                          (static_cast<double>(N) + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (std::size_t j = 1; j <= N; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * static_cast<double>(j) - 1.0) * z * p1 -
                (static_cast<double>(j) - 1.0) * p2) /
               static_cast<double>(j);
        }
        dp = static_cast<double>(N) * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / dp;
        z -= dz;
        if (std::fabs(dz) < 1e-16) break;
      }
      r.nodes[i] = -z;
      r.nodes[N - 1 - i] = z;
      const double w = 2.0 / ((1.0 - z * z) * dp * dp);
      r.weights[i] = w;
      r.weights[N - 1 - i] = w;
    }
    return r;
  }();
  return rule;
}

/// Integral of f over [a, b] with an N-point Gauss-Legendre rule.
template <std::size_t N, class F>
double integrate_gl(F&& f, double a, double b) {
  const auto& gl = gauss_legendre<N>();
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double s = 0.0;
  for (std::size_t k = 0; k < N; ++k) s += gl.weights[k] * f(mid + half * gl.nodes[k]);
  return s * half;
}

}  // namespace coulomb2d
