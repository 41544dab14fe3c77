#include <doctest.h>

#include <cmath>
#include <numbers>

#include "coulomb2d/equilibrium.hpp"
#include "coulomb2d/errors.hpp"
#include "coulomb2d/rng.hpp"
#include "oracles.hpp"

using namespace coulomb2d;
constexpr double pi = std::numbers::pi;

TEST_CASE("potential of a uniform disk") {
  const auto g = GridGeometry::centered(1.5, 240);
  const GridMeasure disk(g, oracle::disk_density(g, {0.0, 0.0}, 1.0));
  // Newton: outside the support the disk acts as a point charge
  CHECK(grid_potential(disk, {2.0, 0.0}) == doctest::Approx(-std::log(2.0)).epsilon(2e-4));
  CHECK(grid_potential(disk, {1.2, 1.6}) == doctest::Approx(-std::log(2.0)).epsilon(2e-4));
  // at the centre: int_0^1 -log r 2r dr = 1/2
  CHECK(grid_potential(disk, {0.0, 0.0}) == doctest::Approx(0.5).epsilon(5e-3));
  CHECK(grid_potential(GridMeasure::zero(g), {0.3, 0.1}) == 0.0);
}

TEST_CASE("potential field agrees with pointwise potential at centres") {
  const auto g = GridGeometry::centered(1.0, 64);
  const GridMeasure mu(g, oracle::disk_density(g, {0.1, -0.2}, 0.6));
  const ScalarField h = grid_potential_field(mu);
  Xoshiro256 rng = Xoshiro256::stream(5, {});
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t k = rng.index(g.size());
    worst = std::max(worst, std::abs(h[k] - grid_potential(mu, g.center(k))));
  }
  CHECK(worst < 1e-10);
  const ScalarField zero = grid_potential_field(GridMeasure::zero(g));
  CHECK(zero.sup_norm() == 0.0);
}

TEST_CASE("potential field is translation equivariant") {
  const auto g = GridGeometry::centered(1.0, 64);
  const GridMeasure mu(g, oracle::disk_density(g, {0.0, 0.0}, 0.4));
  const GridMeasure moved = mu.shifted_cells(5, -3);
  const ScalarField a = grid_potential_field(mu), b = grid_potential_field(moved);
  for (std::size_t j = 10; j < 50; j += 7)
    for (std::size_t i = 10; i < 50; i += 7) CHECK(b[g.index(i + 5, j - 3)] == doctest::Approx(a[g.index(i, j)]).epsilon(1e-12));
}

TEST_CASE("equilibrium measure of the quadratic potential") {
  const auto g = GridGeometry::centered(1.0, 128);
  const auto V = potentials::quadratic();
  const EquilibriumSolution eq = solve_equilibrium(V, g);
  CHECK(eq.mu.mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(eq.residual < 1e-6);
  double inside = 0.0, outside = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double r = g.center(k).norm();
    if (r < 0.6) inside = std::max(inside, std::abs(eq.mu.density(k) - 2.0 / pi));
    if (r > 0.75) outside = std::max(outside, eq.mu.density(k));
  }
  CHECK(inside < 0.02);
  CHECK(outside == 0.0);

  SUBCASE("a constant shift leaves the measure unchanged") {
    const EquilibriumSolution shifted = solve_equilibrium(potentials::quadratic(1.0, {}, 3.0), g);
    CHECK(l1_distance(shifted.mu, eq.mu) < 1e-10);
  }
  SUBCASE("rotation equivariance") {
    const auto aniso = potentials::anisotropic_quadratic(1.0, 2.0, 0.0);
    const auto turned = potentials::anisotropic_quadratic(1.0, 2.0, pi / 2);
    const EquilibriumSolution a = solve_equilibrium(aniso, g), b = solve_equilibrium(turned, g);
    double worst = 0.0;
    for (std::size_t j = 0; j < g.ny; ++j)
      for (std::size_t i = 0; i < g.nx; ++i)
        worst = std::max(worst, std::abs(a.mu.density(g.index(i, j)) - b.mu.density(g.index(g.ny - 1 - j, i))));
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("zeta_V: zero on the support, positive outside") {
  const auto g = GridGeometry::centered(2.5, 200);
  const auto V = potentials::quadratic();
  const EquilibriumSolution eq = solve_equilibrium(V, g);
  const ScalarField z = zeta_V(V, eq.mu);
  double on = 0.0, lowest = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (eq.mu.density(k) > 0.0) on = std::max(on, std::abs(z[k]));
    lowest = std::min(lowest, z[k]);
  }
  CHECK(on < 1e-6);
  CHECK(lowest > -1e-6);
  // radial closed form: h = -log r outside, c_V = (1 + log 2) / 2
  const double cV = 0.5 * (1.0 + std::log(2.0));
  const Vec2 p = g.center(*g.locate({2.0, 0.0}));
  CHECK(z.interpolate(p) == doctest::Approx(-std::log(p.norm()) + p.norm2() - cV).epsilon(2e-3));
}

TEST_CASE("thermal equilibrium") {
  const auto V = potentials::quadratic();
  SUBCASE("theta = 1 is positive everywhere with unit mass") {
    const auto g = GridGeometry::centered(3.5, 96);
    const ThermalSolution s = solve_thermal(V, 1.0, g);
    CHECK(s.mu_theta.mass() == doctest::Approx(1.0).epsilon(1e-12));
    double lo = 1.0;
    for (double d : s.mu_theta.density()) lo = std::min(lo, d);
    CHECK(lo > 0.0);
    CHECK(s.residual <= 1e-9);
    CHECK(thermal_residual(s, V) <= 1e-9);
  }
  SUBCASE("large theta approaches mu_V") {
    const auto g = GridGeometry::centered(1.25, 128);
    const ThermalSolution s = solve_thermal(V, 1e4, g);
    const EquilibriumSolution eq = solve_equilibrium(V, g);
    CHECK(l1_distance(s.mu_theta, eq.mu) < 0.05);
    CHECK(s.residual <= 1e-6);
  }
  SUBCASE("fixed point and Newton agree") {
    const auto g = GridGeometry::centered(3.0, 64);
    ThermalOptions fp;
    fp.method = ThermalMethod::fixed_point;
    fp.max_iterations = 5000;
    const ThermalSolution a = solve_thermal(V, 2.0, g), b = solve_thermal(V, 2.0, g, fp);
    CHECK(l1_distance(a.mu_theta, b.mu_theta) < 1e-7);
  }
  SUBCASE("rebuilding from the density alone") {
    const auto g = GridGeometry::centered(3.0, 64);
    const ThermalSolution a = solve_thermal(V, 3.0, g);
    const ThermalSolution b = thermal_from_measure(a.mu_theta, V, 3.0);
    CHECK(b.c_theta == doctest::Approx(a.c_theta).epsilon(1e-8));
    CHECK(b.residual < 1e-8);
  }
  CHECK_THROWS_AS(solve_thermal(V, -1.0, GridGeometry::centered(1.0, 32)), PreconditionError);
}

TEST_CASE("entropy of piecewise-constant densities") {
  const auto g = GridGeometry::centered(1.0, 100);
  // unit-area square: density 1
  std::vector<double> d(g.size(), 0.0);
  for (std::size_t j = 25; j < 75; ++j)
    for (std::size_t i = 25; i < 75; ++i) d[g.index(i, j)] = 1.0;
  CHECK(thermal_entropy(GridMeasure(g, d)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  const auto disk = oracle::disk_density(g, {0.0, 0.0}, 1.0 / std::sqrt(2.0));
  double c = 0.0;
  for (double v : disk) c = std::max(c, v);
  CHECK(thermal_entropy(GridMeasure(g, disk)) == doctest::Approx(std::log(c)).epsilon(1e-12));
  CHECK(thermal_entropy(GridMeasure(g, disk)) == doctest::Approx(std::log(2.0 / pi)).epsilon(2e-2));

  // same cells on a grid with half the spacing: density x4
  const auto half = GridGeometry::centered(0.5, 100);
  std::vector<double> d4 = d;
  for (double& v : d4) v *= 4.0;
  CHECK(thermal_entropy(GridMeasure(half, d4)) ==
        doctest::Approx(thermal_entropy(GridMeasure(g, d)) + std::log(4.0)).epsilon(1e-12));
}
