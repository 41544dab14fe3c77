#pragma once

// Microscopic point process, correlation functions, Poisson goodness of fit
// and the moment / tail diagnostics evaluated over sampler archives.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "coulomb2d/equilibrium.hpp"
#include "coulomb2d/intervals.hpp"
#include "coulomb2d/kernel.hpp"
#include "coulomb2d/rng.hpp"
#include "coulomb2d/sampler.hpp"
#include "coulomb2d/vec2.hpp"

namespace coulomb2d {

/// Axis-aligned box [c - half, c + half] per axis.
struct Box {
  Vec2 center;
  Vec2 half{0.5, 0.5};
  bool contains(Vec2 p) const {
    return std::abs(p.x - center.x) <= half.x && std::abs(p.y - center.y) <= half.y;
  }
  double area() const { return 4.0 * half.x * half.y; }
  Box scaled(double s) const { return {center, half * s}; }
  static Box square(double side, Vec2 c = {}) { return {c, {0.5 * side, 0.5 * side}}; }
};

/// Points sqrt(N) (x_i - origin) falling in window.
struct PointProcessSample {
  std::vector<Vec2> points;
  Box window;
  Vec2 origin;
  std::size_t n_source = 0;
  std::size_t replica = 0;
  std::size_t frame = 0;
};

PointProcessSample local_process(std::span<const Vec2> X, Vec2 origin, const Box& window);

/// Default microscopic window [-4, 4]^2.
inline const Box kDefaultWindow = Box::square(8.0);

/// local_process of every frame, replica-major.
std::vector<PointProcessSample> local_processes(std::span<const SampleArchive> archives, Vec2 origin,
                                                const Box& window = kDefaultWindow);

/// Homogeneous Poisson(lambda) frames on window.
std::vector<PointProcessSample> synthetic_poisson(double lambda, const Box& window, std::size_t frames,
                                                  Xoshiro256& rng, std::size_t replicas = 1);

// -- time-series helpers -----------------------------------------------------

/// Integrated autocorrelation time with Sokal's automatic window (c = 5).
double integrated_autocorrelation(std::span<const double> series, double c = 5.0);

/// Sum over groups of n_g / tau_g, groups given as consecutive lengths.
double effective_sample_size(std::span<const double> series, std::span<const std::size_t> group_lengths);
double effective_sample_size(std::span<const double> series);

/// Group lengths of a replica-major sample list.
std::vector<std::size_t> replica_groups(std::span<const PointProcessSample> samples);

/// One-sample Kolmogorov-Smirnov test against U(0, 1).
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_uniform(std::vector<double> values);

/// P(K > x) for the Kolmogorov distribution.
double kolmogorov_tail(double x);

// -- fluctuation potentials ---------------------------------------------------

/// h^{mu_theta} at arbitrary points: cubic interpolation inside the grid,
/// direct summation outside.
class ThermalPotential {
 public:
  explicit ThermalPotential(const ThermalSolution& sol) : sol_(&sol) {}
  double operator()(Vec2 y) const;
  const ThermalSolution& solution() const { return *sol_; }

 private:
  const ThermalSolution* sol_;
};

/// (1/N) sum g(y - x_i) - h^{mu_theta}(y). SingularityError if y hits a particle.
double fluct_potential(std::span<const Vec2> X, const ThermalSolution& sol, Vec2 y);

/// (1/N) sum g*psi_{2 eta}(y - x_i) - (h^{mu_theta} * psi_{2 eta})(y).
double smeared_fluct_potential(std::span<const Vec2> X, const ThermalSolution& sol, Vec2 y,
                               kernel::SmearingRadius eta);

/// P(|sum_i h^fluct(y_i)| >= k T N^{-1/2}) per T against
/// 4k (exp(-T sqrt(N) / 2) + exp(-beta T N)), asserted for T >= C log N.
TailCurve concentration_tail(std::span<const SampleArchive> archives, const ThermalSolution& sol,
                             std::span<const Vec2> y_points, const std::vector<double>& T_grid,
                             double C = 4.0);

// -- correlation functions ----------------------------------------------------

struct CorrelationBins {
  std::size_t per_side = 4;  // k = 1: cells per side of the window
  double reach = 1.0;        // k = 2: displacements binned on [-reach, reach]^2
};

struct CorrelationEstimate {
  int k = 1;
  CorrelationBins bins;
  std::vector<Vec2> centers;  // bin centres (positions for k = 1, displacements for k = 2)
  std::vector<double> values;
  std::vector<double> std_err;
  std::size_t frames_used = 0;

  double mean() const;
  nlohmann::json to_json() const;
};

/// k = 1: histogram intensity. k = 2: ordered distinct pairs with the first
/// point in the window shrunk by reach, per displacement bin, divided by the
/// shrunk area and bin area. Errors by batch means over groups (replicas, or
/// `min_groups` contiguous batches of a single replica). StatisticsError if
/// fewer than min_frames frames are given.
CorrelationEstimate estimate_correlation(std::span<const PointProcessSample> samples, int k,
                                         const CorrelationBins& bins = {}, std::size_t min_frames = 100,
                                         std::size_t min_groups = 8);

// -- Poisson goodness of fit --------------------------------------------------

struct PoissonTest {
  double lambda = 0.0;        // intensity per unit rescaled area
  double expected = 0.0;      // lambda |subwindow|
  double mean_count = 0.0;
  double chi_square = 0.0;    // after deflation by ESS / frames
  std::size_t dof = 0;
  double p_value = 1.0;
  double tv = 0.0;
  std::size_t frames = 0;
  double effective_frames = 0.0;
  std::vector<std::size_t> histogram;  // frames with count c

  nlohmann::json to_json() const;
};

/// Chi-square of window counts against Poisson(lambda |subwindow|) with
/// cells pooled to expected >= 5, plus total variation. Needs >= min_effective
/// effective frames (StatisticsError otherwise).
PoissonTest poisson_count_test(std::span<const PointProcessSample> samples, const Box& subwindow, double lambda,
                               double min_effective = 200.0);

std::vector<double> window_counts(std::span<const PointProcessSample> samples, const Box& subwindow);

struct WindowCorrelation {
  double r = 0.0;
  double sigma = 0.0;  // 1 / sqrt(effective frames)
  double z() const { return sigma > 0.0 ? r / sigma : 0.0; }
  bool within(double k = 3.0) const { return std::abs(r) <= k * sigma; }
};

/// Pearson correlation of the counts in two disjoint subwindows.
WindowCorrelation window_count_correlation(std::span<const PointProcessSample> samples, const Box& a,
                                           const Box& b);

// -- functionals and moments --------------------------------------------------

struct LaplaceResult {
  double value = 1.0;
  double std_err = 0.0;
  double reference = 1.0;  // exp(-lambda int (1 - e^{-f}))
  bool consistent(double k = 3.0) const { return std::abs(value - reference) <= k * std_err; }
};

/// Mean of exp(-sum f(p)); reference by Gauss-Legendre quadrature over the
/// window (f must vanish outside it).
LaplaceResult laplace_functional(std::span<const PointProcessSample> samples,
                                 const std::function<double(Vec2)>& f, double lambda);

struct TestFunction {
  std::function<double(Vec2)> value;
  std::function<Vec2(Vec2)> gradient;
};

/// |grad phi|_{L^2} + |grad phi|_inf, both over the grid's domain.
double test_function_norm(const TestFunction& phi, const GridGeometry& g);

struct LinearStatisticReport {
  std::vector<double> values;  // Fluct[phi] per frame
  double mean = 0.0;
  double variance = 0.0;
  double norm = 0.0;
  double log_moment = 0.0;  // log E exp(beta / (C |phi|^2) Fluct^2)
  double bound = 0.0;       // C beta |log beta| N
  bool holds() const { return std::abs(log_moment) <= bound; }
  nlohmann::json to_json() const;
};

/// Fluct[phi] = sum phi(x_i) - N int phi d mu_theta per frame.
LinearStatisticReport linear_statistic(std::span<const SampleArchive> archives, const ThermalSolution& sol,
                                       const TestFunction& phi, double C = 1.0);

struct MomentEstimate {
  double value = 1.0;
  Interval ci;
  double bound_lo = 0.0;
  double bound_hi = 0.0;
  bool asserted = false;
  double effective_frames = 0.0;
  /// Fails only when asserted and the CI lies entirely outside the bounds.
  bool holds() const;
  nlohmann::json to_json() const;
};

/// E exp(2 beta k N int h^{mu_theta} d fluct), bounds exp(+-C k), asserted
/// when beta <= 1 / (sqrt(N) log N).
MomentEstimate thermal_weight_moment(std::span<const SampleArchive> archives, const ThermalSolution& sol,
                                     double k, double C = 5.0);

struct OnePointRatio {
  GridGeometry bulk;
  std::vector<double> ratios;
  std::vector<double> std_err;
  double sup_deviation = 0.0;
  double stat_error = 0.0;  // largest per-cell standard error
  double floor = 0.0;       // C beta N^{(1 + gamma) / 2}
  bool holds() const { return sup_deviation <= std::max(3.0 * stat_error, floor); }
  nlohmann::json to_json() const;
};

/// Histogram density of all particles over bulk cells divided by the cell
/// average of mu_theta.
OnePointRatio one_point_ratio(std::span<const SampleArchive> archives, const ThermalSolution& sol,
                              const GridGeometry& bulk, double C = 1.0, double gamma = 0.1);

/// E exp(t N (h^fluct(x) - h^{fluct * psi_{2 eta}}(x))) against
/// exp(C N eta^2 / (2 - t)); upper bound only.
MomentEstimate smoothing_moment_check(std::span<const SampleArchive> archives, const ThermalSolution& sol,
                                      Vec2 x, double t, kernel::SmearingRadius eta, double C = 10.0);

}  // namespace coulomb2d
