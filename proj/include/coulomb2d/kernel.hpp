#pragma once

// The planar logarithmic interaction g(x) = -log|x|, its averages over
// circles, and its Fourier-side representation. All functions are pure.

#include "coulomb2d/vec2.hpp"

namespace coulomb2d::kernel {

/// Radius of the uniform circle measure phi_eta used to smear point charges.
class SmearingRadius {
 public:
  explicit SmearingRadius(double eta);
  double value() const { return eta_; }

 private:
  double eta_;
};

/// g(x) = -log|x|. Throws SingularityError at x = 0.
double coulomb_g(Vec2 x);

/// (g * phi_eta)(x) = -log max(|x|, eta); regular everywhere.
double smeared_g(Vec2 x, SmearingRadius eta);

/// (g * phi_eta * phi_eta)(x), i.e. g smeared by psi_{2 eta}. Equal to g(x)
/// for |x| >= 2 eta; inside, one circle average of smeared_g split at the
/// kink angles and integrated by Gauss-Legendre.
double psi_smeared_g(Vec2 x, SmearingRadius eta);

/// Radial profile of psi_smeared_g, r = |x| >= 0.
double psi_smeared_g_radial(double r, double eta);

struct KernelGap {
  double value;       // closed form pi eta^2 / 2
  double quadrature;  // radial Gauss-Legendre cross-check
};

/// L1 norm of g - g * phi_eta, which lives on the closed eta-ball.
KernelGap kernel_gap_l1(SmearingRadius eta);

/// Bessel J0 to ~1e-13 absolute: long-double power series below r = 17,
/// Hankel asymptotic expansion above.
double bessel_j0(double r);

/// Fourier transform of the unit circle measure, J0(|xi|).
double sphere_fourier(Vec2 xi);

/// Fourier transform of g with the e^{-2 pi i x.xi} convention: 1/(2 pi |xi|^2).
/// Throws SingularityError at xi = 0.
double kernel_fourier(Vec2 xi);

/// Integral of -log|x| over the axis-aligned rectangle [x0,x1] x [y0,y1].
double log_rectangle_integral(double x0, double x1, double y0, double y1);

/// Double integral of -log|x - y| over x in the unit square [0,1]^2 and y in
/// the unit square shifted by (di, dj). Exact; loses accuracy like |d|^4 eps.
double log_unit_cell_pair_integral(long di, long dj);

}  // namespace coulomb2d::kernel
