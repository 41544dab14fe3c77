#pragma once

// Uniform square grids carrying densities (GridMeasure) or scalar fields
// (ScalarField). Values are stored row-major, index = j * nx + i, with cell
// (i, j) centred at origin + ((i + 1/2) h, (j + 1/2) h).

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "coulomb2d/vec2.hpp"

namespace coulomb2d {

struct GridGeometry {
  Vec2 origin;        // lower-left corner of cell (0, 0)
  double cell = 1.0;  // spacing h
  std::size_t nx = 0;
  std::size_t ny = 0;

  /// Square grid [-half_width, half_width]^2 with `cells` cells per side.
  static GridGeometry centered(double half_width, std::size_t cells);

  std::size_t size() const { return nx * ny; }
  double cell_area() const { return cell * cell; }
  std::size_t index(std::size_t i, std::size_t j) const { return j * nx + i; }
  Vec2 center(std::size_t i, std::size_t j) const {
    return {origin.x + (static_cast<double>(i) + 0.5) * cell,
            origin.y + (static_cast<double>(j) + 0.5) * cell};
  }
  Vec2 center(std::size_t k) const { return center(k % nx, k / nx); }
  Vec2 upper() const {
    return {origin.x + static_cast<double>(nx) * cell, origin.y + static_cast<double>(ny) * cell};
  }
  bool contains(Vec2 p) const;
  /// Cell containing p, if any.
  std::optional<std::size_t> locate(Vec2 p) const;
  /// Same grid refined by an integer factor per axis.
  GridGeometry refined(std::size_t factor) const;

  bool operator==(const GridGeometry&) const = default;
};

/// Scalar values sampled at cell centres.
struct ScalarField {
  GridGeometry geometry;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const GridGeometry& g) : geometry(g), values(g.size(), 0.0) {}
  ScalarField(const GridGeometry& g, std::vector<double> v);

  double operator[](std::size_t k) const { return values[k]; }
  double& operator[](std::size_t k) { return values[k]; }

  /// Tensor-product cubic Lagrange interpolation of the centre samples;
  /// falls back to lower order within one cell of the boundary.
  /// Throws DomainError outside the grid's cell-centre hull.
  double interpolate(Vec2 p) const;
  double sup_norm() const;
};

/// A density on grid cells (per unit area). Probability measures are
/// nonnegative; signed measures (smeared fluctuations) set `is_signed`.
class GridMeasure {
 public:
  GridMeasure() = default;
  GridMeasure(const GridGeometry& g, std::vector<double> density, bool is_signed = false);
  static GridMeasure zero(const GridGeometry& g, bool is_signed = false);

  const GridGeometry& geometry() const { return geometry_; }
  std::span<const double> density() const { return density_; }
  double density(std::size_t k) const { return density_[k]; }
  bool is_signed() const { return signed_; }

  /// Sum of density * cell area, recomputed on every mutation.
  double mass() const { return mass_; }
  double sup_norm() const;

  /// Sum of f(centre) * density * cell area.
  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t k = 0; k < density_.size(); ++k)
      if (density_[k] != 0.0) s += f(geometry_.center(k)) * density_[k];
    return s * geometry_.cell_area();
  }
  double integrate_field(const ScalarField& f) const;

  GridMeasure scaled(double factor) const;
  GridMeasure normalized() const;
  /// Pointwise difference on the same geometry; the result is signed.
  GridMeasure minus(const GridMeasure& other) const;
  /// Shift by an integer number of cells (content leaving the grid is dropped).
  GridMeasure shifted_cells(long di, long dj) const;
  /// 2x2 block average onto the half-resolution grid (nx, ny must be even).
  GridMeasure coarsened() const;

  std::vector<double>& mutable_density() { return density_; }
  void refresh_mass();

 private:
  GridGeometry geometry_;
  std::vector<double> density_;
  bool signed_ = false;
  double mass_ = 0.0;
};

/// Sum of |a - b| * cell area on a common grid.
double l1_distance(const GridMeasure& a, const GridMeasure& b);

/// Fraction of the circle of radius `radius` about `center` that falls in
/// each grid cell, computed exactly from the crossings with grid lines.
/// Returns (cell index, arc fraction) pairs; fractions sum to the portion
/// of the circle inside the grid.
std::vector<std::pair<std::size_t, double>> circle_cell_fractions(const GridGeometry& g,
                                                                 Vec2 center, double radius);

}  // namespace coulomb2d
