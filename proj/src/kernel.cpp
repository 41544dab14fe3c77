#include "coulomb2d/kernel.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "coulomb2d/errors.hpp"
#include "coulomb2d/quadrature.hpp"

namespace coulomb2d::kernel {

namespace {

constexpr double kPi = std::numbers::pi;

// Antiderivative of log(x^2 + y^2) in both variables.
double log_sq_antiderivative(double x, double y) {
  const double r2 = x * x + y * y;
  if (r2 == 0.0) return 0.0;
  double v = x * y * (std::log(r2) - 3.0);
  if (x != 0.0) v += x * x * std::atan(y / x);
  if (y != 0.0) v += y * y * std::atan(x / y);
  return v;
}

// Fourth antiderivative: d^2/dx^2 d^2/dy^2 of this is log(x^2 + y^2).
double log_sq_antiderivative4(double x, double y) {
  const double r2 = x * x + y * y;
  if (r2 == 0.0) return 0.0;
  const double x2 = x * x, y2 = y * y;
  double v = -(x2 * x2 - 6.0 * x2 * y2 + y2 * y2) / 24.0 * std::log(r2) - 25.0 / 24.0 * x2 * y2;
  if (x != 0.0 && y != 0.0) v += (x2 * x * y * std::atan(y / x) + x * y2 * y * std::atan(x / y)) / 3.0;
  return v;
}

}  // namespace

SmearingRadius::SmearingRadius(double eta) : eta_(eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw PreconditionError("smearing radius must be positive and finite, got " +
                            std::to_string(eta));
  }
}

double coulomb_g(Vec2 x) {
  const double r = x.norm();
  if (r == 0.0) throw SingularityError("coulomb_g evaluated at the origin");
  return -std::log(r);
}

double smeared_g(Vec2 x, SmearingRadius eta) {
  return -std::log(std::max(x.norm(), eta.value()));
}

double psi_smeared_g_radial(double r, double eta) {
  if (r >= 2.0 * eta) return -std::log(r);
  // Circle of radius eta around a point at distance r: the part of it inside
  // the eta-ball sees the constant -log(eta), the rest sees -log|.|.
  // Inside arc: |s - pi| < a with cos(a) = r / (2 eta).
  const double a = std::acos(r / (2.0 * eta));
  const double outer = kPi - a;  // half-length of the outside arc
  const auto& gl = gauss_legendre<48>();
  double sum = 0.0;
  const double r2e2 = r * r + eta * eta, two_re = 2.0 * r * eta;
  for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
    const double s = 0.5 * outer * (gl.nodes[k] + 1.0);
    const double d2 = r2e2 + two_re * std::cos(s);
    sum += gl.weights[k] * (-0.5 * std::log(d2));
  }
  sum *= 0.5 * outer;  // integral over [0, outer]
  // Symmetric in s, so the full outside integral is 2 * sum.
  return (2.0 * sum + 2.0 * a * (-std::log(eta))) / (2.0 * kPi);
}

double psi_smeared_g(Vec2 x, SmearingRadius eta) {
  return psi_smeared_g_radial(x.norm(), eta.value());
}

KernelGap kernel_gap_l1(SmearingRadius eta) {
  const double e = eta.value();
  // 2 pi int_0^eta r log(eta / r) dr; r = eta s^4 buries the endpoint log
  // under s^7 so Gauss-Legendre converges fast.
  const auto& gl = gauss_legendre<48>();
  double q = 0.0;
  for (std::size_t k = 0; k < gl.nodes.size(); ++k) {
    const double s = 0.5 * (gl.nodes[k] + 1.0);
    const double s7 = std::pow(s, 7);
    q += 0.5 * gl.weights[k] * 16.0 * s7 * (-std::log(s));
  }
  return {0.5 * kPi * e * e, 2.0 * kPi * e * e * q};
}

double bessel_j0(double r) {
  r = std::fabs(r);
  if (r < 17.0) {
    const long double h = 0.25L * static_cast<long double>(r) * r;
    long double term = 1.0L, sum = 1.0L;
    for (int k = 1; k < 200; ++k) {
      term *= -h / (static_cast<long double>(k) * k);
      sum += term;
      if (std::fabs(term) < 1e-22L) break;
    }
    return static_cast<double>(sum);
  }
  // Hankel expansion: J0 = sqrt(2/(pi r)) (P cos chi - Q sin chi).
  const double z = 8.0 * r;
  double p = 1.0, q = 0.0, term = 1.0, last = 1.0;
  for (int k = 1; k < 80; ++k) {
    const double a = static_cast<double>(2 * k - 1);
    term *= -a * a / (static_cast<double>(k) * z);
    if (std::fabs(term) > std::fabs(last)) break;  // asymptotic series turned
    last = term;
    const int m = k / 2;
    const double signed_term = (m % 2 == 0) ? term : -term;
    if (k % 2 == 0) {
      p += signed_term;
    } else {
      q += signed_term;
    }
    if (std::fabs(term) < 1e-18) break;
  }
  const double chi = r - 0.25 * kPi;
  return std::sqrt(2.0 / (kPi * r)) * (p * std::cos(chi) - q * std::sin(chi));
}

double sphere_fourier(Vec2 xi) { return bessel_j0(xi.norm()); }

double kernel_fourier(Vec2 xi) {
  const double k2 = xi.norm2();
  if (k2 == 0.0) throw SingularityError("kernel_fourier evaluated at zero frequency");
  return 1.0 / (2.0 * kPi * k2);
}

double log_rectangle_integral(double x0, double x1, double y0, double y1) {
  const double v = log_sq_antiderivative(x1, y1) - log_sq_antiderivative(x0, y1) -
                   log_sq_antiderivative(x1, y0) + log_sq_antiderivative(x0, y0);
  return -0.5 * v;
}

double log_unit_cell_pair_integral(long di, long dj) {
  static constexpr double w[3] = {1.0, -2.0, 1.0};
  double v = 0.0;
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b)
      v += w[a + 1] * w[b + 1] *
           log_sq_antiderivative4(static_cast<double>(di + a), static_cast<double>(dj + b));
  return -0.5 * v;
}

}  // namespace coulomb2d::kernel
