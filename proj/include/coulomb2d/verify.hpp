#pragma once

// Deterministic identity checks: energy oracles on smooth signed measures,
// the splitting identity under grid refinement, the regularization gap and
// the min-energy floor over a fixed family.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "coulomb2d/energy.hpp"
#include "coulomb2d/grid.hpp"

namespace coulomb2d::verify {

/// weight * b((x - c) / r) / (mass of b), b(s) = (1 - |s|^2)^4 on the unit
/// disk. Centres snap to cell centres, so equal-radius bumps carry
/// bitwise-equal discrete masses.
struct Bump {
  Vec2 center;
  double radius = 0.25;
  double weight = 1.0;
};

GridMeasure bump_measure(const GridGeometry& g, std::span<const Bump> bumps);

/// Ten zero-mass dipoles of varied separation, width and orientation.
std::vector<GridMeasure> dipole_family(const GridGeometry& g, std::size_t count = 10);

/// Alternating dipoles and quadrupoles at geometric scales, one bump near the
/// origin so that the smeared potential there is nonzero.
std::vector<GridMeasure> min_energy_family(const GridGeometry& g, std::size_t count = 20);

/// Grid for both families: [-2, 2]^2 with 256 cells per side.
GridGeometry family_grid();

struct OracleRow {
  double fourier = 0.0;
  double real_space = 0.0;
  double relative = 0.0;
};

OracleRow energy_oracle(const GridMeasure& nu);

struct SplittingStudy {
  std::vector<double> coarse;  // relative residuals on the coarse grid
  std::vector<double> fine;
  double max_relative = 0.0;   // over the fine grid
  double min_ratio = 0.0;      // min coarse / fine over configurations
  nlohmann::json to_json() const;
};

struct SplittingOptions {
  std::size_t n = 256;
  double theta = 4.0;
  std::size_t configurations = 20;
  std::size_t fine_cells = 512;
  double half_width = 3.5;
  std::uint64_t seed = 20240601;
};

/// Draws iid configurations from mu_theta and evaluates the splitting
/// residual on grids of fine_cells and fine_cells / 2 per side.
SplittingStudy splitting_study(const PotentialSpec& V, const SplittingOptions& opts = {});

struct RegularizationStudy {
  std::vector<RegularizationGap> gaps;
  std::size_t violations = 0;
  double max_gap_over_bound = 0.0;
  nlohmann::json to_json() const;
};

struct RegularizationOptions {
  std::size_t n = 256;
  double theta = 64.0;
  double eta_factor = 0.1;  // eta = eta_factor / sqrt(N)
  std::size_t configurations = 100;
  std::size_t cells = 800;
  double half_width = 1.25;
  double C = 10.0;
  std::uint64_t seed = 20240602;
};

RegularizationStudy regularization_study(const PotentialSpec& V, const RegularizationOptions& opts = {});

struct MinEnergyStudy {
  std::vector<MinEnergyCheck> checks;
  double floor = 0.0;  // min rhs_ratio
  nlohmann::json to_json() const;
};

/// min_energy_check over min_energy_family(family_grid()) at eta.
MinEnergyStudy min_energy_study(double eta = 0.05, std::size_t count = 20);

}  // namespace coulomb2d::verify
