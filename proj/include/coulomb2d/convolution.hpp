#pragma once

// Linear (non-periodic) convolution of grid data with translation-invariant
// kernel tables, done by zero-padded real FFTs (FFTW).

#include <complex>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "coulomb2d/grid.hpp"

namespace coulomb2d {

class Convolver {
 public:
  /// kernel(di, dj) is the weight a source cell contributes to the target
  /// cell displaced by (di, dj) cells.
  Convolver(const GridGeometry& g, const std::function<double(long, long)>& kernel);
  ~Convolver();
  Convolver(const Convolver&) = delete;
  Convolver& operator=(const Convolver&) = delete;

  const GridGeometry& geometry() const { return geometry_; }

  /// out[t] = sum_s kernel(t - s) * source[s].
  std::vector<double> apply(std::span<const double> source) const;

 private:
  struct Plans;
  GridGeometry geometry_;
  std::size_t px_, py_;
  std::vector<std::complex<double>> kernel_hat_;
  std::unique_ptr<Plans> plans_;
};

/// Cells within this many rows/columns of the target are integrated exactly.
inline constexpr long kExactCellReach = 2;

/// Kernel table for the logarithmic potential of a piecewise-constant
/// density: the exact integral of -log over the source cell for nearby
/// cells, h^2 g(offset) beyond kExactCellReach.
double log_cell_kernel(double h, long di, long dj);

/// Cell-averaged kernel: (1/h^2) times the double integral of -log over the
/// cell pair, exact within kPairExactReach, centre value beyond.
inline constexpr long kPairExactReach = 3;
double log_cell_pair_kernel(double h, long di, long dj);

/// Shared convolver for h^nu at cell centres (cached per geometry).
std::shared_ptr<const Convolver> log_convolver(const GridGeometry& g);

/// Shared convolver for cell averages of h^nu (cached per geometry).
std::shared_ptr<const Convolver> log_pair_convolver(const GridGeometry& g);

/// Convolver averaging over circles of radius eta: kernel(d) is the arc
/// fraction of the circle about a cell centre falling in the cell offset by d.
std::shared_ptr<const Convolver> circle_convolver(const GridGeometry& g, double eta);

/// Forward real FFT of `values` (ny rows of nx) zero-padded to py rows of px.
/// Returns py * (px / 2 + 1) coefficients, row-major.
std::vector<std::complex<double>> padded_forward_fft(std::span<const double> values, std::size_t nx,
                                                     std::size_t ny, std::size_t px,
                                                     std::size_t py);

}  // namespace coulomb2d
