#pragma once

#include <functional>
#include <map>
#include <string>

#include "coulomb2d/vec2.hpp"

namespace coulomb2d {

/// Confining potential V with its Laplacian and growth metadata.
struct PotentialSpec {
  std::string name;
  std::map<std::string, double> params;
  std::function<double(Vec2)> evaluate;
  std::function<double(Vec2)> laplacian;
  double growth_exponent = 2.0;  // V(x) >= |x|^gamma for large |x|
  double laplacian_floor = 0.0;  // lower bound for Delta V near the support (metadata only)
  double support_radius = 1.0;   // rough radius of supp mu_V, used for grid sizing

  double operator()(Vec2 x) const { return evaluate(x); }

  /// V + c; the equilibrium problems are invariant under this shift.
  PotentialSpec shifted(double c) const;
  /// x -> V(R^{-1} x) for the rotation R by `angle`.
  PotentialSpec rotated(double angle) const;
};

namespace potentials {

/// a |x - center|^2 + shift. Equilibrium measure: uniform 2a/pi on the disk
/// of radius 1/sqrt(2a) about center.
PotentialSpec quadratic(double a = 1.0, Vec2 center = {}, double shift = 0.0);

/// a u^2 + b v^2 in coordinates rotated by angle.
PotentialSpec anisotropic_quadratic(double a, double b, double angle = 0.0);

/// a |x|^2 + b |x|^4.
PotentialSpec quadratic_quartic(double a, double b);

/// stiffness * dist(x, [-L, L]^2)^2: flat inside the box.
PotentialSpec box_well(double half_width, double stiffness);

/// Builds a potential from its registry name and parameters.
PotentialSpec from_name(const std::string& name, const std::map<std::string, double>& params);

}  // namespace potentials

}  // namespace coulomb2d
