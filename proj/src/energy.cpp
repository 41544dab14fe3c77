#include "coulomb2d/energy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "coulomb2d/convolution.hpp"
#include "coulomb2d/errors.hpp"
#include "coulomb2d/quadrature.hpp"

namespace coulomb2d {

namespace {

constexpr double kPi = std::numbers::pi;

double sum_components(const std::map<std::string, double>& parts) {
  double s = 0.0;
  for (const auto& [name, v] : parts) s += v;
  return s;
}

// 1/2 sum_{i != j} g(x_i - x_j).
double pair_sum(const ParticleConfiguration& X) {
  const std::size_t n = X.n();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = X[i];
    double row = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = a.x - X[j].x, dy = a.y - X[j].y;
      const double r2 = dx * dx + dy * dy;
      if (r2 == 0.0) throw SingularityError("coincident particles " + std::to_string(i) + " and " + std::to_string(j));
      row -= 0.5 * std::log(r2);
    }
    s += row;
  }
  return s;
}

double pair_energy(const GridMeasure& mu) {
  const std::vector<double> Hmu = log_pair_convolver(mu.geometry())->apply(mu.density());
  double s = 0.0;
  for (std::size_t k = 0; k < Hmu.size(); ++k) s += mu.density(k) * Hmu[k];
  return 0.5 * s * mu.geometry().cell_area();
}

std::map<std::string, double> mean_field_parts(const GridMeasure& mu, const PotentialSpec* V,
                                               std::optional<double> theta) {
  std::map<std::string, double> parts;
  parts["pair"] = pair_energy(mu);
  if (V) parts["confinement"] = mu.integrate([&](Vec2 x) { return (*V)(x); });
  if (theta) {
    double ent = 0.0;
    for (double d : mu.density())
      if (d > 0.0) ent += d * std::log(d);
    parts["entropy"] = ent * mu.geometry().cell_area() / *theta;
  }
  return parts;
}

double sinc_pi(double u) {
  if (u == 0.0) return 1.0;
  const double a = kPi * u;
  return std::sin(a) / a;
}

// Periodised kernel weight sum_m S(xi + m/h)^2 / (2 pi |xi + m/h|^2) on the
// half-spectrum lattice of a P x P transform; entry (0, 0) is left at zero.
std::shared_ptr<const std::vector<double>> alias_weights(double h, std::size_t P) {
  static std::mutex m;
  static std::map<std::tuple<double, std::size_t>, std::shared_ptr<const std::vector<double>>> cache;
  std::lock_guard lock(m);
  if (auto it = cache.find({h, P}); it != cache.end()) return it->second;
  constexpr int kImages = 3;
  const std::size_t half = P / 2 + 1;
  auto w = std::make_shared<std::vector<double>>(P * half, 0.0);
  const double P_d = static_cast<double>(P);
  for (std::size_t ky = 0; ky < P; ++ky) {
    const double uy = (ky < P / 2 + (P % 2) ? static_cast<double>(ky) : static_cast<double>(ky) - P_d) / P_d;
    for (std::size_t kx = 0; kx < half; ++kx) {
      const double ux = static_cast<double>(kx) / P_d;  // xi h
      double s = 0.0;
      for (int mx = -kImages; mx <= kImages; ++mx)
        for (int my = -kImages; my <= kImages; ++my) {
          const double ax = ux + mx, ay = uy + my;
          const double r2 = ax * ax + ay * ay;
          if (r2 == 0.0) continue;
          const double S = sinc_pi(ax) * sinc_pi(ay);
          s += S * S / r2;
        }
      (*w)[ky * half + kx] = s * h * h / (2.0 * kPi);  // |xi|^2 = r2 / h^2
    }
  }
  if (cache.size() > 8) cache.clear();
  cache.emplace(std::make_tuple(h, P), w);
  return w;
}

// Integral of -log max(|x - y|, eta) over cell k.
double smeared_cell_integral(const GridGeometry& g, std::size_t k, Vec2 y, double eta) {
  const double h = g.cell;
  const Vec2 c = g.center(k);
  const double x0 = c.x - 0.5 * h - y.x, x1 = x0 + h, y0 = c.y - 0.5 * h - y.y, y1 = y0 + h;
  const double nx = std::max({x0, -x1, 0.0}), ny = std::max({y0, -y1, 0.0});
  if (nx * nx + ny * ny >= eta * eta) return kernel::log_rectangle_integral(x0, x1, y0, y1);
  // The disk cuts this cell: -log r everywhere, plus (log r - log eta) on
  // the disk, a continuous integrand integrated on subcells.
  double s = kernel::log_rectangle_integral(x0, x1, y0, y1);
  constexpr int kSub = 8;
  const double sub = h / kSub;
  const auto& gl = gauss_legendre<6>();
  for (int a = 0; a < kSub; ++a)
    for (int b = 0; b < kSub; ++b) {
      const double sx = x0 + a * sub, sy = y0 + b * sub;
      for (std::size_t p = 0; p < gl.nodes.size(); ++p)
        for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
          const double px = sx + 0.5 * sub * (1.0 + gl.nodes[p]);
          const double py = sy + 0.5 * sub * (1.0 + gl.nodes[q]);
          const double r = std::hypot(px, py);
          if (r < eta && r > 0.0) s += 0.25 * sub * sub * gl.weights[p] * gl.weights[q] * std::log(r / eta);
        }
    }
  return s;
}

}  // namespace

nlohmann::json EnergyReport::to_json() const {
  nlohmann::json j;
  j["value"] = value;
  j["breakdown"] = breakdown;
  j["quadrature_error_estimate"] = quadrature_error_estimate;
  return j;
}

double hamiltonian(const ParticleConfiguration& X, const PotentialSpec& V) {
  X.validate();
  double conf = 0.0;
  for (const Vec2& x : X.positions) conf += V(x);
  return pair_sum(X) + static_cast<double>(X.n()) * conf;
}

EnergyReport mean_field_energy(const GridMeasure& mu, const PotentialSpec* V, std::optional<double> theta) {
  if (!std::isfinite(mu.mass())) throw PreconditionError("mean_field_energy needs a finite measure");
  if (theta && !(*theta > 0.0)) throw PreconditionError("theta must be positive");
  EnergyReport r;
  r.breakdown = mean_field_parts(mu, V, theta);
  r.value = sum_components(r.breakdown);
  const GridGeometry& g = mu.geometry();
  if (g.nx % 2 == 0 && g.ny % 2 == 0 && g.nx >= 8 && g.ny >= 8) {
    const double coarse = sum_components(mean_field_parts(mu.coarsened(), V, theta));
    r.quadrature_error_estimate = std::fabs(r.value - coarse) / 3.0;
  }
  return r;
}

EnergyReport next_order_report(const ParticleConfiguration& X, const GridMeasure& mu,
                               const ScalarField* potential) {
  X.validate();
  if (std::fabs(mu.mass() - 1.0) > 1e-8) throw PreconditionError("next_order_energy needs a probability measure");
  const double N = static_cast<double>(X.n());
  EnergyReport r;
  r.breakdown["pair"] = pair_sum(X) / (N * N);
  double cross = 0.0;
  if (potential) {
    for (const Vec2& x : X.positions) cross += potential->interpolate(x);
  } else {
    for (double v : grid_potential(mu, X.positions)) cross += v;
  }
  r.breakdown["cross"] = -cross / N;
  r.breakdown["background"] = pair_energy(mu);
  r.value = sum_components(r.breakdown);
  return r;
}

double next_order_energy(const ParticleConfiguration& X, const GridMeasure& mu, const ScalarField* potential) {
  return next_order_report(X, mu, potential).value;
}

SplittingResidual splitting_residual(const ParticleConfiguration& X, const PotentialSpec& V,
                                     const ThermalSolution& sol) {
  X.validate();
  const double N = static_cast<double>(X.n());
  double sum_log = 0.0;
  for (const Vec2& x : X.positions) sum_log += sol.log_density.interpolate(x);
  const double E_theta = sum_components(mean_field_parts(sol.mu_theta, &V, sol.theta));
  const double F = next_order_energy(X, sol.mu_theta);
  SplittingResidual out;
  out.hamiltonian = hamiltonian(X, V);
  out.residual = out.hamiltonian - (N * N * E_theta - N / sol.theta * sum_log + N * N * F);
  out.relative = std::fabs(out.residual) / std::fabs(out.hamiltonian);
  return out;
}

GridMeasure smear_measure(const GridMeasure& mu, kernel::SmearingRadius eta) {
  const GridGeometry& g = mu.geometry();
  if (eta.value() < 2.0 * g.cell) throw PreconditionError("smearing radius below two grid cells");
  std::vector<double> v = circle_convolver(g, eta.value())->apply(mu.density());
  double top = 0.0;
  for (double d : v) top = std::max(top, std::fabs(d));
  bool negative = false;
  for (double& d : v) {
    if (d < 0.0 && d > -1e-12 * top) d = 0.0;
    negative = negative || d < 0.0;
  }
  return GridMeasure(g, std::move(v), mu.is_signed() || negative);
}

GridMeasure smear_fluctuation(const ParticleConfiguration& X, const GridMeasure& mu_smeared, double eta) {
  X.validate();
  const GridGeometry& g = mu_smeared.geometry();
  if (eta < 2.0 * g.cell) throw PreconditionError("smearing radius below two grid cells");
  std::vector<double> d(mu_smeared.density().begin(), mu_smeared.density().end());
  for (double& v : d) v = -v;
  const double w = 1.0 / (static_cast<double>(X.n()) * g.cell_area());
  for (const Vec2& x : X.positions) {
    double total = 0.0;
    for (const auto& [k, f] : circle_cell_fractions(g, x, eta)) {
      d[k] += w * f;
      total += f;
    }
    if (total < 1.0 - 1e-12) throw DomainError("smearing circle leaves the grid");
  }
  return GridMeasure(g, std::move(d), true);
}

GridMeasure smear_fluctuation(const ParticleConfiguration& X, const GridMeasure& mu, kernel::SmearingRadius eta) {
  return smear_fluctuation(X, smear_measure(mu, eta), eta.value());
}

namespace {

// Lattice sum of 1/2 g^ |nu^|^2 over a P x P padded transform.
double fourier_lattice_energy(const GridMeasure& nu, std::size_t P, Vec2 moment) {
  const GridGeometry& g = nu.geometry();
  const std::size_t half = P / 2 + 1;
  const auto D = padded_forward_fft(nu.density(), g.nx, g.ny, P, P);
  const auto W = alias_weights(g.cell, P);
  double s = 0.0;
  for (std::size_t ky = 0; ky < P; ++ky)
    for (std::size_t kx = 0; kx < half; ++kx) {
      const std::size_t k = ky * half + kx;
      const double mult = (kx == 0 || (P % 2 == 0 && kx == P / 2)) ? 1.0 : 2.0;
      s += mult * std::norm(D[k]) * (*W)[k];
    }
  const double area = g.cell_area();
  const double dxi = 1.0 / (static_cast<double>(P) * g.cell);
  return 0.5 * area * area * s * dxi * dxi + 0.5 * kPi * moment.norm2() * dxi * dxi;
}

}  // namespace

double fourier_energy(const GridMeasure& nu, std::size_t padding) {
  const GridGeometry& g = nu.geometry();
  double total_variation = 0.0;
  Vec2 moment;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double d = nu.density(k);
    total_variation += std::fabs(d);
    moment = moment + d * g.center(k);
  }
  const double area = g.cell_area();
  total_variation *= area;
  moment = moment * area;
  if (std::fabs(nu.mass()) > 1e-9 * total_variation + 1e-300)
    throw PreconditionError("fourier_energy needs a zero-mass measure");
  if (total_variation == 0.0) return 0.0;
  if (padding < 2) throw PreconditionError("fourier_energy needs padding >= 2");

  const std::size_t n = std::max(g.nx, g.ny);
  const double fine = fourier_lattice_energy(nu, padding * n, moment);
  if (padding < 4) return fine;
  // The lattice sum errs by O(dxi^4) (the dxi^2 term cancels on the square
  // lattice once the zero cell is taken from the first moment).
  const double coarse = fourier_lattice_energy(nu, (padding / 2) * n, moment);
  return fine + (fine - coarse) / 15.0;
}

RegularizationProbe::RegularizationProbe(const ThermalSolution& sol, kernel::SmearingRadius eta, double C,
                                         std::size_t padding)
    : sol_(sol), eta_(eta.value()), padding_(padding), smeared_(smear_measure(sol.mu_theta, eta)),
      background_(pair_energy(sol.mu_theta)) {
  const double m = sol.mu_theta.sup_norm();
  tail_ = C * (m + m * m) * eta_ * eta_;
}

RegularizationGap RegularizationProbe::operator()(const ParticleConfiguration& X) const {
  X.validate();
  const double N = static_cast<double>(X.n());
  double cross = 0.0;
  for (const Vec2& x : X.positions) cross += sol_.potential.interpolate(x);
  const double F = pair_sum(X) / (N * N) - cross / N + background_;
  RegularizationGap r;
  r.gap = fourier_energy(smear_fluctuation(X, smeared_, eta_), padding_) - F;
  r.bound = -std::log(eta_) / (2.0 * N) + tail_;
  return r;
}

RegularizationGap regularization_gap(const ParticleConfiguration& X, const ThermalSolution& sol,
                                     kernel::SmearingRadius eta, double C) {
  return RegularizationProbe(sol, eta, C, 4)(X);
}

double smeared_potential_at(const GridMeasure& nu, Vec2 y, kernel::SmearingRadius eta) {
  const GridGeometry& g = nu.geometry();
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (nu.density(k) != 0.0) s += nu.density(k) * smeared_cell_integral(g, k, y, eta.value());
  return s;
}

MinEnergyCheck min_energy_check(const GridMeasure& nu, kernel::SmearingRadius eta, std::optional<double> delta) {
  const GridGeometry& g = nu.geometry();
  double first = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) first += g.center(k).norm() * std::fabs(nu.density(k));
  first *= g.cell_area();
  MinEnergyCheck out;
  out.epsilon = std::fabs(smeared_potential_at(nu, {0.0, 0.0}, eta));
  if (!(out.epsilon > 0.0)) throw PreconditionError("min_energy_check needs epsilon > 0");
  out.delta = delta.value_or(1.0 / first);
  if (!(out.delta > 0.0) || out.delta * first > 1.0 + 1e-12)
    throw PreconditionError("first moment of nu exceeds 1/delta");
  out.energy = fourier_energy(nu);
  const double logs = 1.0 - std::log(out.epsilon) - std::log(out.delta) - std::log(eta.value());
  out.rhs_ratio = out.energy * logs / (out.epsilon * out.epsilon);
  return out;
}

double smoothing_background(const ThermalSolution& sol, Vec2 y, kernel::SmearingRadius eta) {
  const double e = eta.value();
  constexpr std::size_t kAngles = 32;
  const auto& gl = gauss_legendre<24>();
  // r = e t^2 on [0, e] and r = 2e - e t^2 on [e, 2e], t in [0, 1]: both
  // ends of the kernel's support are smoothed by the substitution.
  double s = 0.0;
  for (int piece = 0; piece < 2; ++piece)
    for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
      const double t = 0.5 * (1.0 + gl.nodes[q]);
      const double r = piece == 0 ? e * t * t : 2.0 * e - e * t * t;
      const double jac = 2.0 * e * t * 0.5 * gl.weights[q];
      if (r <= 0.0) continue;
      const double k = -std::log(r) - kernel::psi_smeared_g_radial(r, e);
      double ring = 0.0;
      for (std::size_t a = 0; a < kAngles; ++a) {
        const double phi = 2.0 * kPi * (static_cast<double>(a) + 0.5) / kAngles;
        ring += std::exp(sol.log_density.interpolate({y.x + r * std::cos(phi), y.y + r * std::sin(phi)}));
      }
      s += jac * k * r * ring * (2.0 * kPi / kAngles);
    }
  return s;
}

SmoothingCheck smoothing_lower_bound_check(const ParticleConfiguration& X, const ThermalSolution& sol, Vec2 y,
                                           kernel::SmearingRadius eta, double C) {
  X.validate();
  const double e = eta.value();
  double points = 0.0;
  for (const Vec2& x : X.positions) {
    const double r = (y - x).norm();
    if (r == 0.0) throw SingularityError("evaluation point coincides with a particle");
    if (r < 2.0 * e) points += -std::log(r) - kernel::psi_smeared_g_radial(r, e);
  }
  SmoothingCheck out;
  out.value = points / static_cast<double>(X.n()) - smoothing_background(sol, y, eta);
  out.bound = -C * sol.mu_theta.sup_norm() * e * e;
  return out;
}

}  // namespace coulomb2d
