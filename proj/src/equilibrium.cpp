#include "coulomb2d/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "coulomb2d/convolution.hpp"
#include "coulomb2d/errors.hpp"
#include "coulomb2d/kernel.hpp"

namespace coulomb2d {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<std::size_t> occupied_cells(const GridMeasure& nu) {
  std::vector<std::size_t> cells;
  for (std::size_t k = 0; k < nu.density().size(); ++k)
    if (nu.density(k) != 0.0) cells.push_back(k);
  return cells;
}

double potential_at(const GridMeasure& nu, const std::vector<std::size_t>& cells, Vec2 y) {
  const GridGeometry& g = nu.geometry();
  const double h = g.cell, hh = 0.5 * h, area = h * h;
  const long iy = static_cast<long>(std::floor((y.x - g.origin.x) / h));
  const long jy = static_cast<long>(std::floor((y.y - g.origin.y) / h));
  double s = 0.0;
  for (std::size_t k : cells) {
    const long i = static_cast<long>(k % g.nx), j = static_cast<long>(k / g.nx);
    const Vec2 c = g.center(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    const double dx = c.x - y.x, dy = c.y - y.y;
    const double d = nu.density(k);
    if (std::labs(i - iy) <= kExactCellReach && std::labs(j - jy) <= kExactCellReach)
      s += d * kernel::log_rectangle_integral(dx - hh, dx + hh, dy - hh, dy + hh);
    else
      s -= 0.5 * d * area * std::log(dx * dx + dy * dy);
  }
  return s;
}

std::vector<double> normalized_exp(std::vector<double>& u, double area) {
  const double m = *std::max_element(u.begin(), u.end());
  double s = 0.0;
  for (double v : u) s += std::exp(v - m);
  const double shift = m + std::log(s * area);
  std::vector<double> mu(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    u[k] -= shift;
    mu[k] = std::exp(u[k]);
  }
  return mu;
}

// Working state of the thermal iteration in log-density variables.
struct ThermalState {
  std::vector<double> u, mu, hfield, R;  // R = u + theta (V + h), density-mean removed
  double energy = 0.0;                   // E_theta
  double residual = 0.0;                 // sup |R| / theta on cells above the floor
  double mean = 0.0;                     // density-weighted mean of the raw R
};

class ThermalProblem {
 public:
  ThermalProblem(const std::vector<double>& V, double theta, const GridGeometry& g)
      : V_(V), theta_(theta), g_(g), area_(g.cell_area()), conv_(log_convolver(g)) {}

  ThermalState evaluate(std::vector<double> u) const {
    ThermalState s;
    s.mu = normalized_exp(u, area_);
    s.u = std::move(u);
    s.hfield = conv_->apply(s.mu);
    const std::size_t n = s.u.size();
    s.R.resize(n);
    double interaction = 0.0, confinement = 0.0, entropy = 0.0, mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      s.R[k] = s.u[k] + theta_ * (V_[k] + s.hfield[k]);
      const double w = s.mu[k] * area_;
      interaction += w * s.hfield[k];
      confinement += w * V_[k];
      entropy += w * s.u[k];
      mean += w * s.R[k];
    }
    s.energy = 0.5 * interaction + confinement + entropy / theta_;
    s.mean = mean;
    double sup = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      s.R[k] -= mean;
      if (s.mu[k] > 1e-12) sup = std::max(sup, std::fabs(s.R[k]));
    }
    s.residual = sup / theta_;
    return s;
  }

  // Inexact Newton direction: (I + theta H M) d = -R on density-mean-zero d,
  // by CG in the density-weighted inner product.
  std::vector<double> newton_direction(const ThermalState& s, double rel_tol, int max_iter,
                                       int& cg_iterations) const {
    const std::size_t n = s.u.size();
    auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
      double t = 0.0;
      for (std::size_t k = 0; k < n; ++k) t += s.mu[k] * a[k] * b[k];
      return t * area_;
    };
    auto project = [&](std::vector<double>& a) {
      const double m = dot(a, ones_(n));
      for (double& v : a) v -= m;
    };
    std::vector<double> weighted(n);
    auto apply_H = [&](const std::vector<double>& a) {
      for (std::size_t k = 0; k < n; ++k) weighted[k] = s.mu[k] * a[k];
      return conv_->apply(weighted);
    };
    auto op = [&](const std::vector<double>& a) {
      std::vector<double> out = apply_H(a);
      for (std::size_t k = 0; k < n; ++k) out[k] = a[k] + theta_ * out[k];
      project(out);
      return out;
    };

    std::vector<double> x(n, 0.0), r(n), p;
    for (std::size_t k = 0; k < n; ++k) r[k] = -s.R[k];
    project(r);
    p = r;
    double rr = dot(r, r);
    const double stop = rel_tol * rel_tol * rr;
    cg_iterations = 0;
    for (int it = 0; it < max_iter && rr > stop && rr > 0.0; ++it) {
      const std::vector<double> Ap = op(p);
      const double pAp = dot(p, Ap);
      if (!(pAp > 0.0)) break;
      const double alpha = rr / pAp;
      for (std::size_t k = 0; k < n; ++k) {
        x[k] += alpha * p[k];
        r[k] -= alpha * Ap[k];
      }
      const double rr_new = dot(r, r);
      for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + (rr_new / rr) * p[k];
      rr = rr_new;
      ++cg_iterations;
    }

    // Cells carrying negligible weight are invisible to the weighted CG; their
    // components follow from the linearised equation directly.
    const std::vector<double> Hx = apply_H(x);
    double kappa = 0.0;
    for (std::size_t k = 0; k < n; ++k) kappa += s.mu[k] * Hx[k];
    kappa *= theta_ * area_;
    const double mu_max = *std::max_element(s.mu.begin(), s.mu.end());
    for (std::size_t k = 0; k < n; ++k)
      if (s.mu[k] < 1e-8 * mu_max) x[k] = kappa - s.R[k] - theta_ * Hx[k];
    return x;
  }

  ThermalState newton(std::vector<double> u0, double tol, int max_iter, int& iterations,
                      int max_cg) const {
    ThermalState s = evaluate(std::move(u0));
    for (iterations = 0; iterations < max_iter; ++iterations) {
      if (s.residual <= tol) return s;
      int cg = 0;
      const double rel = std::clamp(s.residual, 1e-10, 1e-2);
      const std::vector<double> d = newton_direction(s, rel, max_cg, cg);
      double slope = 0.0;
      for (std::size_t k = 0; k < d.size(); ++k) slope += s.mu[k] * d[k] * s.R[k];
      slope *= area_ / theta_;
      double t = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
        std::vector<double> u = s.u;
        for (std::size_t k = 0; k < u.size(); ++k) u[k] += t * d[k];
        ThermalState trial = evaluate(std::move(u));
        const bool armijo = trial.energy <= s.energy + 1e-4 * t * slope;
        const bool flat = std::fabs(trial.energy - s.energy) <= 1e-13 * (1.0 + std::fabs(s.energy));
        if (std::isfinite(trial.energy) && (armijo || (flat && trial.residual < s.residual))) {
          s = std::move(trial);
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    if (s.residual <= tol) return s;
    throw ConvergenceError("thermal Newton iteration stalled", s.residual, iterations);
  }

  ThermalState fixed_point(std::vector<double> u0, double tol, double alpha, int max_iter,
                           int& iterations) const {
    ThermalState s = evaluate(std::move(u0));
    for (iterations = 0; iterations < max_iter; ++iterations) {
      if (s.residual <= tol) return s;
      std::vector<double> w(s.u.size());
      for (std::size_t k = 0; k < w.size(); ++k) w[k] = -theta_ * (V_[k] + s.hfield[k]);
      normalized_exp(w, area_);
      std::vector<double> u(s.u.size());
      for (std::size_t k = 0; k < u.size(); ++k) {
        // log((1 - alpha) e^u + alpha e^w) without underflow
        const double a = std::log1p(-alpha) + s.u[k], b = std::log(alpha) + w[k];
        const double m = std::max(a, b);
        u[k] = m + std::log(std::exp(a - m) + std::exp(b - m));
      }
      ThermalState next = evaluate(std::move(u));
      if (!std::isfinite(next.residual))
        throw ConvergenceError("thermal fixed point diverged; use a smaller damping", s.residual,
                               iterations);
      if (next.residual > s.residual) {
        alpha *= 0.5;
        if (alpha < 1e-8)
          throw ConvergenceError("thermal fixed point oscillates; use a smaller damping",
                                 s.residual, iterations);
      }
      s = std::move(next);
    }
    if (s.residual <= tol) return s;
    throw ConvergenceError("thermal fixed point did not converge; use a smaller damping",
                           s.residual, iterations);
  }

 private:
  static const std::vector<double>& ones_(std::size_t n) {
    thread_local std::vector<double> ones;
    if (ones.size() != n) ones.assign(n, 1.0);
    return ones;
  }

  const std::vector<double>& V_;
  double theta_;
  GridGeometry g_;
  double area_;
  std::shared_ptr<const Convolver> conv_;
};

ThermalSolution finish(const ThermalState& s, double theta, const GridGeometry& g, int iterations) {
  ThermalSolution out;
  std::vector<double> density = s.mu;
  for (double& d : density)
    if (d < 1e-300) d = 0.0;
  out.mu_theta = GridMeasure(g, std::move(density));
  out.log_density = ScalarField(g, s.u);
  out.potential = ScalarField(g, s.hfield);
  out.theta = theta;
  out.c_theta = s.mean / theta;
  out.residual = s.residual;
  out.iterations = iterations;
  double ring = 0.0;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i)
      if (i == 0 || j == 0 || i + 1 == g.nx || j + 1 == g.ny) ring += out.mu_theta.density(g.index(i, j));
  out.boundary_mass = ring * g.cell_area();
  return out;
}

ThermalSolution run_levels(const std::vector<double>& V, const std::vector<double>& thetas,
                           std::vector<double> u, const GridGeometry& g,
                           const ThermalOptions& options) {
  ThermalState s;
  int total = 0;
  double previous = 0.0;
  for (double theta : thetas) {
    if (previous > 0.0)
      for (double& v : u) v *= theta / previous;
    ThermalProblem problem(V, theta, g);
    int it = 0;
    if (options.method == ThermalMethod::newton)
      s = problem.newton(std::move(u), options.tolerance, options.max_iterations, it,
                         options.max_cg_iterations);
    else
      s = problem.fixed_point(std::move(u), options.tolerance, options.damping,
                              options.max_iterations, it);
    total += it;
    u = s.u;
    previous = theta;
  }
  return finish(s, thetas.back(), g, total);
}

std::vector<double> theta_levels(double theta, const ThermalOptions& options, double from = 0.0) {
  std::vector<double> levels{theta};
  if (options.continuation && options.method == ThermalMethod::newton) {
    const double floor = std::max(options.continuation_start, from);
    for (double t = theta / 10.0; t > floor * (1.0 + 1e-12); t /= 10.0) levels.push_back(t);
  }
  std::reverse(levels.begin(), levels.end());
  return levels;
}

}  // namespace

ScalarField sample_potential(const PotentialSpec& V, const GridGeometry& g) {
  ScalarField f(g);
  for (std::size_t k = 0; k < g.size(); ++k) f[k] = V(g.center(k));
  return f;
}

double grid_potential(const GridMeasure& nu, Vec2 y) {
  if (!y.finite()) throw PreconditionError("grid_potential at a non-finite point");
  return potential_at(nu, occupied_cells(nu), y);
}

std::vector<double> grid_potential(const GridMeasure& nu, std::span<const Vec2> ys) {
  const std::vector<std::size_t> cells = occupied_cells(nu);
  std::vector<double> out(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (!ys[i].finite()) throw PreconditionError("grid_potential at a non-finite point");
    out[i] = potential_at(nu, cells, ys[i]);
  }
  return out;
}

ScalarField grid_potential_field(const GridMeasure& nu) {
  return ScalarField(nu.geometry(), log_convolver(nu.geometry())->apply(nu.density()));
}

EquilibriumSolution solve_equilibrium(const PotentialSpec& V, const GridGeometry& g,
                                      const EquilibriumOptions& options) {
  const std::size_t n = g.size();
  const double area = g.cell_area(), h2 = area;
  const ScalarField Vf = sample_potential(V, g);
  const auto conv = log_convolver(g);

  // Initial coincidence set: sublevel set of V carrying unit mass of
  // Delta V / (2 pi) (floored so that flat wells still terminate).
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return Vf[a] < Vf[b]; });
  std::vector<char> in(n, 0);
  std::vector<double> mu(n, 0.0);
  double acc = 0.0;
  for (std::size_t k : order) {
    const double d = std::max(V.laplacian(g.center(k)) / kTwoPi, 0.05);
    in[k] = 1;
    mu[k] = d;
    acc += d * area;
    if (acc >= 1.0) break;
  }

  auto project = [&](std::vector<double>& a) {
    double s = 0.0;
    std::size_t m = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (in[k]) s += a[k], ++m;
    const double mean = m ? s / static_cast<double>(m) : 0.0;
    for (std::size_t k = 0; k < n; ++k) a[k] = in[k] ? a[k] - mean : 0.0;
  };
  // -Delta_h / (2 pi) with zero values off the set: approximates H^{-1}.
  auto precondition = [&](const std::vector<double>& r) {
    std::vector<double> z(n, 0.0);
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i) {
        const std::size_t k = g.index(i, j);
        if (!in[k]) continue;
        double s = 4.0 * r[k];
        if (i > 0) s -= r[k - 1];
        if (i + 1 < g.nx) s -= r[k + 1];
        if (j > 0) s -= r[k - g.nx];
        if (j + 1 < g.ny) s -= r[k + g.nx];
        z[k] = s / (kTwoPi * h2);
      }
    project(z);
    return z;
  };
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
    return s;
  };
  auto sup = [&](const std::vector<double>& a) {
    double s = 0.0;
    for (double v : a) s = std::max(s, std::fabs(v));
    return s;
  };

  auto solve_on_set = [&]() {
    double mass = 0.0;
    std::size_t m = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (!in[k]) mu[k] = 0.0;
      else mass += mu[k] * area, ++m;
    }
    const double shift = (1.0 - mass) / (static_cast<double>(m) * area);
    for (std::size_t k = 0; k < n; ++k)
      if (in[k]) mu[k] += shift;
    auto gradient_residual = [&]() {
      std::vector<double> r = conv->apply(mu);
      for (std::size_t k = 0; k < n; ++k) r[k] = -(r[k] + Vf[k]);
      project(r);
      return r;
    };
    std::vector<double> r = gradient_residual();
    std::vector<double> z = precondition(r), p = z;
    double rz = dot(r, z);
    for (int it = 0; it < options.max_cg_iterations; ++it) {
      if (sup(r) <= options.cg_tolerance) return;
      std::vector<double> Ap = conv->apply(p);
      project(Ap);
      const double pAp = dot(p, Ap);
      if (!(pAp > 0.0)) break;
      const double alpha = rz / pAp;
      for (std::size_t k = 0; k < n; ++k) {
        mu[k] += alpha * p[k];
        r[k] -= alpha * Ap[k];
      }
      if ((it + 1) % 50 == 0) r = gradient_residual();
      z = precondition(r);
      const double rz_new = dot(r, z);
      for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + (rz_new / rz) * p[k];
      rz = rz_new;
    }
    if (sup(r) > 100.0 * options.cg_tolerance)
      throw ConvergenceError("equilibrium subproblem did not converge", sup(r), options.max_cg_iterations);
  };

  EquilibriumSolution out;
  std::vector<double> zeta(n);
  double c = 0.0;
  for (int it = 0; it <= options.max_active_set_iterations; ++it) {
    solve_on_set();
    const std::vector<double> hf = conv->apply(mu);
    double s = 0.0, m = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (in[k]) s += hf[k] + Vf[k], m += 1.0;
    c = s / m;
    for (std::size_t k = 0; k < n; ++k) zeta[k] = hf[k] + Vf[k] - c;

    std::vector<char> next(n);
    bool changed = false;
    for (std::size_t k = 0; k < n; ++k) {
      next[k] = in[k] ? (mu[k] > 0.0) : (zeta[k] < -1e3 * options.cg_tolerance);
      changed = changed || next[k] != in[k];
    }
    out.iterations = it;
    if (!changed) break;
    if (it == options.max_active_set_iterations) {
      double defect = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        defect = std::max(defect, in[k] ? std::max(-mu[k], 0.0) : std::max(-zeta[k], 0.0));
      throw ConvergenceError("equilibrium active set did not settle", defect, it);
    }
    in = std::move(next);
  }

  double residual = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (in[k]) residual = std::max(residual, std::fabs(zeta[k]));
    else residual = std::max(residual, std::max(-zeta[k], 0.0));
    if (mu[k] < 0.0) mu[k] = 0.0;
  }
  out.mu = GridMeasure(g, mu);
  out.zeta = ScalarField(g, zeta);
  out.c_V = c;
  out.residual = residual;
  return out;
}

ThermalSolution solve_thermal(const PotentialSpec& V, double theta, const GridGeometry& g,
                              const ThermalOptions& options) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw PreconditionError("theta must be positive");
  if (!(options.damping > 0.0 && options.damping <= 1.0))
    throw PreconditionError("damping must lie in (0, 1]");
  const std::vector<double> Vv = sample_potential(V, g).values;
  const std::vector<double> levels = theta_levels(theta, options);
  std::vector<double> u(g.size());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = -levels.front() * Vv[k];
  return run_levels(Vv, levels, std::move(u), g, options);
}

ThermalSolution thermal_from_measure(const GridMeasure& mu, const PotentialSpec& V, double theta) {
  if (!(theta > 0.0)) throw PreconditionError("theta must be positive");
  if (std::fabs(mu.mass() - 1.0) > 1e-8) throw PreconditionError("thermal density must have unit mass");
  const GridGeometry& g = mu.geometry();
  ThermalSolution out;
  out.mu_theta = mu;
  out.theta = theta;
  out.potential = grid_potential_field(mu);
  const ScalarField v = sample_potential(V, g);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double d = mu.density(k);
    if (d <= 1e-12) continue;
    num += d * (out.potential[k] + v[k] + std::log(d) / theta);
    den += d;
  }
  out.c_theta = num / den;
  out.log_density = ScalarField(g);
  for (std::size_t k = 0; k < g.size(); ++k) out.log_density[k] = theta * (out.c_theta - out.potential[k] - v[k]);
  out.residual = thermal_residual(out, V);
  double ring = 0.0;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i)
      if (i == 0 || j == 0 || i + 1 == g.nx || j + 1 == g.ny) ring += mu.density(g.index(i, j));
  out.boundary_mass = ring * g.cell_area();
  return out;
}

ThermalSolution solve_thermal_from(const PotentialSpec& V, double theta, const ThermalSolution& start,
                                   const ThermalOptions& options) {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw PreconditionError("theta must be positive");
  const GridGeometry& g = start.mu_theta.geometry();
  const std::vector<double> Vv = sample_potential(V, g).values;
  std::vector<double> levels;
  if (theta > start.theta)
    levels = theta_levels(theta, options, start.theta);
  else
    levels = {theta};
  std::vector<double> u = start.log_density.values;
  for (double& v : u) v *= levels.front() / start.theta;
  return run_levels(Vv, levels, std::move(u), g, options);
}

double thermal_residual(const ThermalSolution& s, const PotentialSpec& V, double floor) {
  const GridGeometry& g = s.mu_theta.geometry();
  const ScalarField h = grid_potential_field(s.mu_theta);
  std::vector<double> bracket(g.size());
  double mean = 0.0, mass = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    bracket[k] = h[k] + V(g.center(k)) + s.log_density[k] / s.theta;
    mean += s.mu_theta.density(k) * bracket[k];
    mass += s.mu_theta.density(k);
  }
  mean /= mass;
  double sup = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k)
    if (s.mu_theta.density(k) > floor) sup = std::max(sup, std::fabs(bracket[k] - mean));
  return sup;
}

ScalarField zeta_V(const PotentialSpec& V, const GridMeasure& mu_V, double tol) {
  const GridGeometry& g = mu_V.geometry();
  ScalarField z = grid_potential_field(mu_V);
  double mean = 0.0, mass = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    z[k] += V(g.center(k));
    mean += mu_V.density(k) * z[k];
    mass += mu_V.density(k);
  }
  if (!(mass > 0.0)) throw PreconditionError("zeta_V needs a nonzero measure");
  mean /= mass;
  double lowest = 0.0;
  for (double& v : z.values) {
    v -= mean;
    lowest = std::min(lowest, v);
  }
  if (lowest < -tol) throw ConvergenceError("zeta_V is negative; equilibrium solve is inaccurate", -lowest, 0);
  return z;
}

double thermal_entropy(const GridMeasure& mu) {
  double s = 0.0;
  for (double d : mu.density())
    if (d > 0.0) s += d * std::log(d);
  return s * mu.geometry().cell_area();
}

}  // namespace coulomb2d
