#pragma once

// Hamiltonian, mean-field and next-order energies, the splitting identity,
// smeared fluctuation measures and the energy inequalities built on them.

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "coulomb2d/configuration.hpp"
#include "coulomb2d/equilibrium.hpp"
#include "coulomb2d/grid.hpp"
#include "coulomb2d/kernel.hpp"
#include "coulomb2d/potential.hpp"

namespace coulomb2d {

struct EnergyReport {
  double value = 0.0;
  std::map<std::string, double> breakdown;  // subset of pair, confinement, cross, background, entropy
  double quadrature_error_estimate = 0.0;

  nlohmann::json to_json() const;
};

/// 1/2 sum_{i != j} g(x_i - x_j) + N sum_i V(x_i), by direct summation.
double hamiltonian(const ParticleConfiguration& X, const PotentialSpec& V);

/// E(mu) = 1/2 double integral of g against the piecewise-constant density,
/// plus int V dmu when V is given, plus (1/theta) int mu log mu when theta
/// is given. The error estimate compares against the 2x coarsened grid.
EnergyReport mean_field_energy(const GridMeasure& mu, const PotentialSpec* V = nullptr,
                               std::optional<double> theta = std::nullopt);

/// Components of F_N(X, mu). With `potential` (h^mu at cell centres) the
/// cross term interpolates it; otherwise h^mu(x_i) is summed directly.
EnergyReport next_order_report(const ParticleConfiguration& X, const GridMeasure& mu,
                               const ScalarField* potential = nullptr);
double next_order_energy(const ParticleConfiguration& X, const GridMeasure& mu,
                         const ScalarField* potential = nullptr);

struct SplittingResidual {
  double residual = 0.0;     // H_N - [N^2 E_theta - (N/theta) sum log mu + N^2 F_N]
  double hamiltonian = 0.0;
  double relative = 0.0;     // |residual| / |H_N|
};

/// Evaluates both sides of the splitting formula with the thermal solution.
SplittingResidual splitting_residual(const ParticleConfiguration& X, const PotentialSpec& V,
                                     const ThermalSolution& mu_theta);

/// (emp_N - mu) * phi_eta on mu's grid: each point's circle deposited by
/// exact arc fractions, minus mu averaged over circles by convolution.
/// Needs eta >= 2 cells and every circle inside the grid.
GridMeasure smear_fluctuation(const ParticleConfiguration& X, const GridMeasure& mu,
                              kernel::SmearingRadius eta);

/// Same, reusing a precomputed mu * phi_eta (for sweeps over many X).
GridMeasure smear_fluctuation(const ParticleConfiguration& X, const GridMeasure& mu_smeared,
                              double eta);

/// mu * phi_eta on mu's grid.
GridMeasure smear_measure(const GridMeasure& mu, kernel::SmearingRadius eta);

/// 1/2 int g^(xi) |nu^(xi)|^2 dxi for a zero-mass piecewise-constant nu:
/// exact cell transform, frequency lattice from zero padding by `padding`,
/// periodised kernel weight (|m| <= 3 images) and the zero-mode cell
/// evaluated from the first moment. For padding >= 4 the O(dxi^4) lattice
/// error is extrapolated away using the half-padded sum.
double fourier_energy(const GridMeasure& nu, std::size_t padding = 4);

struct RegularizationGap {
  double gap = 0.0;    // E((emp - mu) * phi_eta) - F_N
  double bound = 0.0;  // -log(eta)/(2N) + C (|mu|_inf + |mu|_inf^2) eta^2
  bool holds() const { return gap <= bound; }
};

/// Evaluates the gap for many configurations against one thermal solution,
/// precomputing mu * phi_eta and E(mu). The cross term interpolates the
/// solution's potential field.
class RegularizationProbe {
 public:
  RegularizationProbe(const ThermalSolution& sol, kernel::SmearingRadius eta, double C = 10.0,
                      std::size_t padding = 2);
  RegularizationGap operator()(const ParticleConfiguration& X) const;

 private:
  const ThermalSolution& sol_;
  double eta_;
  std::size_t padding_;
  GridMeasure smeared_;
  double background_;
  double tail_ = 0.0;
};

RegularizationGap regularization_gap(const ParticleConfiguration& X, const ThermalSolution& mu_theta,
                                     kernel::SmearingRadius eta, double C = 10.0);

struct MinEnergyCheck {
  double epsilon = 0.0;     // |h^{nu * phi_eta}(0)|
  double energy = 0.0;      // fourier_energy(nu)
  double delta = 0.0;       // 1 / int |x| |nu|(dx)
  double rhs_ratio = 0.0;   // E (1 + log 1/eps + log 1/delta + log 1/eta) / eps^2
};

/// Requires zero mass and epsilon > 0. delta defaults to the largest value
/// allowed by the first moment of nu.
MinEnergyCheck min_energy_check(const GridMeasure& nu, kernel::SmearingRadius eta,
                                std::optional<double> delta = std::nullopt);

/// h^{smeared}(0) = int g * phi_eta (y) nu(dy) for a grid measure.
double smeared_potential_at(const GridMeasure& nu, Vec2 y, kernel::SmearingRadius eta);

/// int (g - g * psi_{2 eta})(y - x) mu(dx) by polar quadrature about y on the
/// interpolated density (exp of the interpolated log density).
double smoothing_background(const ThermalSolution& mu_theta, Vec2 y, kernel::SmearingRadius eta);

struct SmoothingCheck {
  double value = 0.0;  // h^fluct(y) - h^{fluct * psi_{2 eta}}(y)
  double bound = 0.0;  // -C |mu|_inf eta^2
  bool holds() const { return value >= bound; }
};

SmoothingCheck smoothing_lower_bound_check(const ParticleConfiguration& X,
                                           const ThermalSolution& mu_theta, Vec2 y,
                                           kernel::SmearingRadius eta, double C = 10.0);

}  // namespace coulomb2d
