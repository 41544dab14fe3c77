#pragma once

// Equilibrium measure mu_V and thermal equilibrium measure mu_theta on a
// uniform grid, with the logarithmic potentials they generate.

#include <span>
#include <string>
#include <vector>

#include "coulomb2d/grid.hpp"
#include "coulomb2d/potential.hpp"

namespace coulomb2d {

/// V sampled at the cell centres of g.
ScalarField sample_potential(const PotentialSpec& V, const GridGeometry& g);

/// h^nu(y) by direct summation over cells. Cells within kExactCellReach
/// rows/columns of the cell containing y use the exact integral of -log over
/// the cell; the rest use the centre value.
double grid_potential(const GridMeasure& nu, Vec2 y);

/// grid_potential at many points, sharing the cell list.
std::vector<double> grid_potential(const GridMeasure& nu, std::span<const Vec2> ys);

/// h^nu at every cell centre, by FFT convolution with the same kernel rule.
ScalarField grid_potential_field(const GridMeasure& nu);

struct EquilibriumOptions {
  int max_active_set_iterations = 60;
  int max_cg_iterations = 2000;
  double cg_tolerance = 1e-12;
};

struct EquilibriumSolution {
  GridMeasure mu;       // discrete minimiser of E_V over probability densities
  ScalarField zeta;     // h^mu + V - c_V
  double c_V = 0.0;
  double residual = 0.0;  // complementarity defect, max(|zeta| on supp, -zeta off supp)
  int iterations = 0;     // active-set updates
};

/// Minimises the discrete E_V(mu) = 1/2 <mu, H mu> + <V, mu> over mu >= 0 of
/// unit mass by a primal-dual active set iteration on the coincidence set
/// {zeta = 0}, starting from density Delta V / (2 pi) on a sublevel set of V.
EquilibriumSolution solve_equilibrium(const PotentialSpec& V, const GridGeometry& g,
                                      const EquilibriumOptions& options = {});

enum class ThermalMethod { newton, fixed_point };

struct ThermalOptions {
  ThermalMethod method = ThermalMethod::newton;
  double tolerance = 1e-9;     // sup-norm EL residual on cells with density > 1e-12
  double damping = 0.5;        // fixed-point only
  int max_iterations = 200;    // Newton steps (or fixed-point sweeps) per level
  int max_cg_iterations = 1500;
  bool continuation = true;    // approach theta through theta / 10^k from below
  double continuation_start = 10.0;
};

struct ThermalSolution {
  GridMeasure mu_theta;
  ScalarField log_density;  // log mu_theta, finite everywhere (no underflow)
  ScalarField potential;    // h^{mu_theta} at cell centres
  double theta = 0.0;
  double c_theta = 0.0;
  double residual = 0.0;
  int iterations = 0;
  double boundary_mass = 0.0;  // mass in the outermost ring of cells
};

/// Solves h^mu + V + (1/theta) log mu = c_theta for a probability density.
ThermalSolution solve_thermal(const PotentialSpec& V, double theta, const GridGeometry& g,
                              const ThermalOptions& options = {});

/// Continues an existing solution to a new theta on the same grid.
ThermalSolution solve_thermal_from(const PotentialSpec& V, double theta, const ThermalSolution& start,
                                   const ThermalOptions& options = {});

/// Rebuilds the fields of a thermal solution from its density alone (as read
/// back from disk): h by convolution, c_theta as the density-weighted mean of
/// h + V + log(mu) / theta, and log mu = theta (c_theta - h - V) so that
/// underflowed cells stay finite.
ThermalSolution thermal_from_measure(const GridMeasure& mu, const PotentialSpec& V, double theta);

/// Sup over cells with density > floor of |h + V + log(mu)/theta - c|, with c
/// the density-weighted mean of the bracket.
double thermal_residual(const ThermalSolution& s, const PotentialSpec& V, double floor = 1e-12);

/// zeta_V = h^{mu_V} + V - c_V. Throws ConvergenceError if it dips below -tol.
ScalarField zeta_V(const PotentialSpec& V, const GridMeasure& mu_V, double tol = 1e-6);

/// Integral of mu log mu with 0 log 0 = 0.
double thermal_entropy(const GridMeasure& mu);

}  // namespace coulomb2d
