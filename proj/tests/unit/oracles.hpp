#pragma once

// Independent reference computations used by the unit tests. None of these
// call into the library's numerics.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "coulomb2d/grid.hpp"

namespace oracle {

using coulomb2d::Vec2;

/// Adaptive Gauss-Kronrod on [a, b], split at the given interior points.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        std::vector<double> breaks = {}, double tol = 1e-14, unsigned depth = 15) {
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] <= breaks[i]) continue;
    s += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, breaks[i], breaks[i + 1], depth, tol);
  }
  return s;
}

/// Average of -log|x - eta u| over the unit circle u, by the periodic
/// trapezoid rule (spectrally accurate away from the circle itself).
inline double circle_average_log(Vec2 x, double eta, int points = 4096) {
  double s = 0.0;
  for (int k = 0; k < points; ++k) {
    const double a = 2.0 * std::numbers::pi * k / points;
    const double dx = x.x - eta * std::cos(a), dy = x.y - eta * std::sin(a);
    s += -0.5 * std::log(dx * dx + dy * dy);
  }
  return s / points;
}

/// Circle average over u of -log max(|x - eta u|, eta), split at the angles
/// where the max switches branch.
inline double nested_circle_log(Vec2 x, double eta) {
  const double r = std::hypot(x.x, x.y);
  const double alpha = std::atan2(x.y, x.x);
  auto f = [&](double a) {
    const double dx = x.x - eta * std::cos(a), dy = x.y - eta * std::sin(a);
    return -std::log(std::max(std::hypot(dx, dy), eta));
  };
  std::vector<double> breaks;
  const double c = r / (2.0 * eta);
  if (c < 1.0) {
    const double d = std::acos(c);
    for (double b : {alpha - d, alpha + d}) {
      while (b < 0.0) b += 2.0 * std::numbers::pi;
      while (b > 2.0 * std::numbers::pi) b -= 2.0 * std::numbers::pi;
      breaks.push_back(b);
    }
  }
  return integrate(f, 0.0, 2.0 * std::numbers::pi, breaks) / (2.0 * std::numbers::pi);
}

/// J0 by its power series in long double.
inline double j0_series(double r) {
  long double term = 1.0L, sum = 1.0L;
  const long double q = -0.25L * r * r;
  for (int k = 1; k < 80; ++k) {
    term *= q / (static_cast<long double>(k) * k);
    sum += term;
  }
  return static_cast<double>(sum);
}

/// Piecewise-constant density equal to c on cells whose centre is within
/// radius of center, normalised to the given mass.
inline std::vector<double> disk_density(const coulomb2d::GridGeometry& g, Vec2 center, double radius,
                                        double mass = 1.0) {
  std::vector<double> d(g.size(), 0.0);
  std::size_t count = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Vec2 p = g.center(k);
    if (std::hypot(p.x - center.x, p.y - center.y) <= radius) {
      d[k] = 1.0;
      ++count;
    }
  }
  for (double& v : d) v *= mass / (static_cast<double>(count) * g.cell_area());
  return d;
}

/// Direct double sum Hamiltonian.
inline double hamiltonian(const std::vector<Vec2>& X, const std::function<double(Vec2)>& V) {
  double h = 0.0;
  const double n = static_cast<double>(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) {
    h += n * V(X[i]);
    for (std::size_t j = i + 1; j < X.size(); ++j) h -= std::log(std::hypot(X[i].x - X[j].x, X[i].y - X[j].y));
  }
  return h;
}

}  // namespace oracle
