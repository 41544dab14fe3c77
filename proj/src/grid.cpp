#include "coulomb2d/grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>

#include "coulomb2d/errors.hpp"

namespace coulomb2d {

GridGeometry GridGeometry::centered(double half_width, std::size_t cells) {
  if (!(half_width > 0.0) || cells == 0) throw PreconditionError("empty grid");
  GridGeometry g;
  g.origin = {-half_width, -half_width};
  g.cell = 2.0 * half_width / static_cast<double>(cells);
  g.nx = g.ny = cells;
  return g;
}

bool GridGeometry::contains(Vec2 p) const {
  const Vec2 u = upper();
  return p.x >= origin.x && p.x < u.x && p.y >= origin.y && p.y < u.y;
}

std::optional<std::size_t> GridGeometry::locate(Vec2 p) const {
  if (!contains(p)) return std::nullopt;
  auto i = static_cast<std::size_t>((p.x - origin.x) / cell);
  auto j = static_cast<std::size_t>((p.y - origin.y) / cell);
  i = std::min(i, nx - 1);
  j = std::min(j, ny - 1);
  return index(i, j);
}

GridGeometry GridGeometry::refined(std::size_t factor) const {
  GridGeometry g = *this;
  g.cell = cell / static_cast<double>(factor);
  g.nx = nx * factor;
  g.ny = ny * factor;
  return g;
}

ScalarField::ScalarField(const GridGeometry& g, std::vector<double> v)
    : geometry(g), values(std::move(v)) {
  if (values.size() != g.size()) throw PreconditionError("field size does not match grid");
}

namespace {

// Lagrange weights for nodes {0,1,2,3} at coordinate t.
std::array<double, 4> cubic_weights(double t) {
  return {-(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0, t * (t - 2.0) * (t - 3.0) / 2.0,
          -t * (t - 1.0) * (t - 3.0) / 2.0, t * (t - 1.0) * (t - 2.0) / 6.0};
}

struct Stencil {
  std::size_t first;
  std::size_t count;
  std::array<double, 4> w;
};

Stencil stencil_1d(double u, std::size_t n) {
  if (n == 1) return {0, 1, {1.0, 0.0, 0.0, 0.0}};
  if (n < 4) {
    auto i0 = static_cast<std::size_t>(std::floor(u));
    i0 = std::min(i0, n - 2);
    const double t = u - static_cast<double>(i0);
    return {i0, 2, {1.0 - t, t, 0.0, 0.0}};
  }
  long i0 = static_cast<long>(std::floor(u)) - 1;
  i0 = std::clamp(i0, 0L, static_cast<long>(n) - 4);
  return {static_cast<std::size_t>(i0), 4, cubic_weights(u - static_cast<double>(i0))};
}

}  // namespace

double ScalarField::interpolate(Vec2 p) const {
  const auto& g = geometry;
  const double u = (p.x - g.origin.x) / g.cell - 0.5;
  const double v = (p.y - g.origin.y) / g.cell - 0.5;
  const double tol = 1e-9;
  if (!(u >= -tol && v >= -tol && u <= static_cast<double>(g.nx - 1) + tol &&
        v <= static_cast<double>(g.ny - 1) + tol)) {
    throw DomainError("interpolation point outside the grid's cell-centre hull");
  }
  const Stencil sx = stencil_1d(std::clamp(u, 0.0, static_cast<double>(g.nx - 1)), g.nx);
  const Stencil sy = stencil_1d(std::clamp(v, 0.0, static_cast<double>(g.ny - 1)), g.ny);
  double s = 0.0;
  for (std::size_t b = 0; b < sy.count; ++b) {
    double row = 0.0;
    const std::size_t base = (sy.first + b) * g.nx + sx.first;
    for (std::size_t a = 0; a < sx.count; ++a) row += sx.w[a] * values[base + a];
    s += sy.w[b] * row;
  }
  return s;
}

double ScalarField::sup_norm() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::fabs(v));
  return m;
}

GridMeasure::GridMeasure(const GridGeometry& g, std::vector<double> density, bool is_signed)
    : geometry_(g), density_(std::move(density)), signed_(is_signed) {
  if (density_.size() != g.size()) throw PreconditionError("density size does not match grid");
  if (!signed_) {
    for (double d : density_)
      if (d < 0.0) throw PreconditionError("negative density in a nonnegative measure");
  }
  refresh_mass();
}

GridMeasure GridMeasure::zero(const GridGeometry& g, bool is_signed) {
  return GridMeasure(g, std::vector<double>(g.size(), 0.0), is_signed);
}

void GridMeasure::refresh_mass() {
  double s = 0.0;
  for (double d : density_) s += d;
  mass_ = s * geometry_.cell_area();
}

double GridMeasure::sup_norm() const {
  double m = 0.0;
  for (double d : density_) m = std::max(m, std::fabs(d));
  return m;
}

double GridMeasure::integrate_field(const ScalarField& f) const {
  if (!(f.geometry == geometry_)) throw PreconditionError("field and measure grids differ");
  double s = 0.0;
  for (std::size_t k = 0; k < density_.size(); ++k) s += f.values[k] * density_[k];
  return s * geometry_.cell_area();
}

GridMeasure GridMeasure::scaled(double factor) const {
  std::vector<double> d = density_;
  for (double& v : d) v *= factor;
  return GridMeasure(geometry_, std::move(d), signed_ || factor < 0.0);
}

GridMeasure GridMeasure::normalized() const {
  if (mass_ == 0.0) throw PreconditionError("cannot normalise a zero-mass measure");
  return scaled(1.0 / mass_);
}

GridMeasure GridMeasure::minus(const GridMeasure& other) const {
  if (!(other.geometry_ == geometry_)) throw PreconditionError("grids differ");
  std::vector<double> d = density_;
  for (std::size_t k = 0; k < d.size(); ++k) d[k] -= other.density_[k];
  return GridMeasure(geometry_, std::move(d), true);
}

GridMeasure GridMeasure::shifted_cells(long di, long dj) const {
  std::vector<double> d(density_.size(), 0.0);
  const long nx = static_cast<long>(geometry_.nx), ny = static_cast<long>(geometry_.ny);
  for (long j = 0; j < ny; ++j) {
    const long jt = j + dj;
    if (jt < 0 || jt >= ny) continue;
    for (long i = 0; i < nx; ++i) {
      const long it = i + di;
      if (it < 0 || it >= nx) continue;
      d[static_cast<std::size_t>(jt * nx + it)] = density_[static_cast<std::size_t>(j * nx + i)];
    }
  }
  return GridMeasure(geometry_, std::move(d), signed_);
}

GridMeasure GridMeasure::coarsened() const {
  const auto& g = geometry_;
  if (g.nx % 2 != 0 || g.ny % 2 != 0) throw PreconditionError("coarsening needs even grid sizes");
  GridGeometry c = g;
  c.nx /= 2;
  c.ny /= 2;
  c.cell *= 2.0;
  std::vector<double> d(c.size(), 0.0);
  for (std::size_t j = 0; j < c.ny; ++j)
    for (std::size_t i = 0; i < c.nx; ++i)
      d[c.index(i, j)] = 0.25 * (density_[g.index(2 * i, 2 * j)] + density_[g.index(2 * i + 1, 2 * j)] +
                                 density_[g.index(2 * i, 2 * j + 1)] +
                                 density_[g.index(2 * i + 1, 2 * j + 1)]);
  return GridMeasure(c, std::move(d), signed_);
}

double l1_distance(const GridMeasure& a, const GridMeasure& b) {
  if (!(a.geometry() == b.geometry())) throw PreconditionError("grids differ");
  double s = 0.0;
  for (std::size_t k = 0; k < a.geometry().size(); ++k) s += std::fabs(a.density(k) - b.density(k));
  return s * a.geometry().cell_area();
}

std::vector<std::pair<std::size_t, double>> circle_cell_fractions(const GridGeometry& g,
                                                                 Vec2 center, double radius) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> angles{0.0, two_pi};
  auto add_crossings = [&](double line, double c, bool vertical) {
    const double q = (line - c) / radius;
    if (q <= -1.0 || q >= 1.0) return;
    const double a = std::acos(q);  // vertical: cos t = q; horizontal: sin t = q
    if (vertical) {
      angles.push_back(a);
      angles.push_back(two_pi - a);
    } else {
      const double t = std::asin(q);
      angles.push_back(t < 0.0 ? t + two_pi : t);
      angles.push_back(std::numbers::pi - t);
    }
  };
  const auto i_lo = static_cast<long>(std::floor((center.x - radius - g.origin.x) / g.cell));
  const auto i_hi = static_cast<long>(std::ceil((center.x + radius - g.origin.x) / g.cell));
  for (long i = i_lo; i <= i_hi; ++i)
    add_crossings(g.origin.x + static_cast<double>(i) * g.cell, center.x, true);
  const auto j_lo = static_cast<long>(std::floor((center.y - radius - g.origin.y) / g.cell));
  const auto j_hi = static_cast<long>(std::ceil((center.y + radius - g.origin.y) / g.cell));
  for (long j = j_lo; j <= j_hi; ++j)
    add_crossings(g.origin.y + static_cast<double>(j) * g.cell, center.y, false);
  std::sort(angles.begin(), angles.end());

  std::map<std::size_t, double> acc;
  for (std::size_t k = 0; k + 1 < angles.size(); ++k) {
    const double len = angles[k + 1] - angles[k];
    if (len <= 0.0) continue;
    const double mid = 0.5 * (angles[k] + angles[k + 1]);
    const Vec2 p = center + Vec2{radius * std::cos(mid), radius * std::sin(mid)};
    if (auto cell = g.locate(p)) acc[*cell] += len / two_pi;
  }
  return {acc.begin(), acc.end()};
}

}  // namespace coulomb2d
