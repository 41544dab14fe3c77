#include "coulomb2d/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coulomb2d/errors.hpp"
#include "coulomb2d/rng.hpp"
#include "coulomb2d/sampler.hpp"

namespace coulomb2d::verify {

GridGeometry family_grid() { return GridGeometry::centered(2.0, 256); }

GridMeasure bump_measure(const GridGeometry& g, std::span<const Bump> bumps) {
  std::vector<double> d(g.size(), 0.0);
  for (const Bump& b : bumps) {
    const auto k0 = g.locate(b.center);
    if (!k0) throw DomainError("bump centre outside the grid");
    const long ci = static_cast<long>(*k0 % g.nx), cj = static_cast<long>(*k0 / g.nx);
    const long reach = static_cast<long>(std::ceil(b.radius / g.cell)) + 1;
    if (ci - reach < 0 || cj - reach < 0 || ci + reach >= static_cast<long>(g.nx) ||
        cj + reach >= static_cast<long>(g.ny))
      throw DomainError("bump leaves the grid");
    std::vector<std::pair<std::size_t, double>> cells;
    double mass = 0.0;
    for (long dj = -reach; dj <= reach; ++dj)
      for (long di = -reach; di <= reach; ++di) {
        const double s2 = (static_cast<double>(di * di + dj * dj)) * g.cell * g.cell / (b.radius * b.radius);
        if (s2 >= 1.0) continue;
        const double v = std::pow(1.0 - s2, 4);
        cells.push_back({g.index(static_cast<std::size_t>(ci + di), static_cast<std::size_t>(cj + dj)), v});
        mass += v;
      }
    if (!(mass > 0.0)) throw PreconditionError("bump radius below one cell");
    const double scale = b.weight / (mass * g.cell_area());
    for (auto [k, v] : cells) d[k] += scale * v;
  }
  return GridMeasure(g, std::move(d), true);
}

std::vector<GridMeasure> dipole_family(const GridGeometry& g, std::size_t count) {
  std::vector<GridMeasure> out;
  for (std::size_t m = 0; m < count; ++m) {
    const double angle = 0.7 * static_cast<double>(m);
    const double sep = 0.4 + 0.08 * static_cast<double>(m);
    const double r = 0.2 + 0.02 * static_cast<double>(m % 4);
    const Vec2 u{0.5 * sep * std::cos(angle), 0.5 * sep * std::sin(angle)};
    const Bump b[] = {{u, r, 1.0}, {-u, r, -1.0}};
    out.push_back(bump_measure(g, b));
  }
  return out;
}

std::vector<GridMeasure> min_energy_family(const GridGeometry& g, std::size_t count) {
  std::vector<GridMeasure> out;
  for (std::size_t m = 0; m < count; ++m) {
    const double s = 0.15 * std::pow(1.12, static_cast<double>(m));
    const Vec2 p{0.05 * s, 0.03 * s};
    const double r = 0.3 * s;
    if (m % 2 == 0) {
      const Bump b[] = {{p, r, 1.0}, {p + Vec2{1.0 * s, 0.5 * s}, r, -1.0}};
      out.push_back(bump_measure(g, b));
    } else {
      const Bump b[] = {{p, r, 1.0}, {p + Vec2{0.8 * s, 0.0}, r, -0.5}, {p - Vec2{0.8 * s, 0.0}, r, -0.5}};
      out.push_back(bump_measure(g, b));
    }
  }
  return out;
}

OracleRow energy_oracle(const GridMeasure& nu) {
  OracleRow r;
  r.fourier = fourier_energy(nu);
  r.real_space = mean_field_energy(nu).value;
  r.relative = std::abs(r.fourier - r.real_space) / std::abs(r.real_space);
  return r;
}

nlohmann::json SplittingStudy::to_json() const {
  return {{"coarse", coarse}, {"fine", fine}, {"max_relative", max_relative}, {"min_ratio", min_ratio}};
}

SplittingStudy splitting_study(const PotentialSpec& V, const SplittingOptions& o) {
  if (o.fine_cells % 2 != 0) throw PreconditionError("fine grid needs an even cell count");
  const ThermalSolution fine = solve_thermal(V, o.theta, GridGeometry::centered(o.half_width, o.fine_cells));
  const ThermalSolution coarse = solve_thermal(V, o.theta, GridGeometry::centered(o.half_width, o.fine_cells / 2));
  SplittingStudy s;
  s.min_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < o.configurations; ++k) {
    Xoshiro256 rng = Xoshiro256::stream(o.seed, {k});
    const ParticleConfiguration X = sample_iid(fine.mu_theta, o.n, rng);
    const double f = splitting_residual(X, V, fine).relative;
    const double c = splitting_residual(X, V, coarse).relative;
    s.fine.push_back(f);
    s.coarse.push_back(c);
    s.max_relative = std::max(s.max_relative, f);
    s.min_ratio = std::min(s.min_ratio, c / f);
  }
  return s;
}

nlohmann::json RegularizationStudy::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& g : gaps) rows.push_back({{"gap", g.gap}, {"bound", g.bound}});
  return {{"violations", violations}, {"max_gap_over_bound", max_gap_over_bound}, {"rows", rows}};
}

RegularizationStudy regularization_study(const PotentialSpec& V, const RegularizationOptions& o) {
  const ThermalSolution sol = solve_thermal(V, o.theta, GridGeometry::centered(o.half_width, o.cells));
  const kernel::SmearingRadius eta(o.eta_factor / std::sqrt(static_cast<double>(o.n)));
  const RegularizationProbe probe(sol, eta, o.C);
  RegularizationStudy s;
  s.max_gap_over_bound = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < o.configurations; ++k) {
    Xoshiro256 rng = Xoshiro256::stream(o.seed, {k});
    const ParticleConfiguration X = sample_iid(sol.mu_theta, o.n, rng);
    const RegularizationGap g = probe(X);
    s.gaps.push_back(g);
    s.violations += !g.holds();
    s.max_gap_over_bound = std::max(s.max_gap_over_bound, g.gap / g.bound);
  }
  return s;
}

nlohmann::json MinEnergyStudy::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : checks)
    rows.push_back({{"epsilon", c.epsilon}, {"energy", c.energy}, {"delta", c.delta}, {"rhs_ratio", c.rhs_ratio}});
  return {{"floor", floor}, {"rows", rows}};
}

MinEnergyStudy min_energy_study(double eta, std::size_t count) {
  MinEnergyStudy s;
  s.floor = std::numeric_limits<double>::infinity();
  for (const GridMeasure& nu : min_energy_family(family_grid(), count)) {
    s.checks.push_back(min_energy_check(nu, kernel::SmearingRadius(eta)));
    s.floor = std::min(s.floor, s.checks.back().rhs_ratio);
  }
  return s;
}

}  // namespace coulomb2d::verify
