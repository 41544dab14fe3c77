#include "coulomb2d/potential.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "coulomb2d/errors.hpp"

namespace coulomb2d {

PotentialSpec PotentialSpec::shifted(double c) const {
  PotentialSpec s = *this;
  auto f = evaluate;
  s.evaluate = [f, c](Vec2 x) { return f(x) + c; };
  s.params["shift"] = (params.count("shift") ? params.at("shift") : 0.0) + c;
  return s;
}

PotentialSpec PotentialSpec::rotated(double angle) const {
  PotentialSpec s = *this;
  auto f = evaluate;
  auto l = laplacian;
  s.evaluate = [f, angle](Vec2 x) { return f(rotate(x, -angle)); };
  s.laplacian = [l, angle](Vec2 x) { return l(rotate(x, -angle)); };
  s.params["rotation"] = (params.count("rotation") ? params.at("rotation") : 0.0) + angle;
  return s;
}

namespace potentials {

PotentialSpec quadratic(double a, Vec2 center, double shift) {
  if (!(a > 0.0)) throw PreconditionError("quadratic potential needs a > 0");
  PotentialSpec v;
  v.name = "quadratic";
  v.params = {{"a", a}, {"cx", center.x}, {"cy", center.y}, {"shift", shift}};
  v.evaluate = [a, center, shift](Vec2 x) { return a * (x - center).norm2() + shift; };
  v.laplacian = [a](Vec2) { return 4.0 * a; };
  v.growth_exponent = 2.0;
  v.laplacian_floor = 4.0 * a;
  v.support_radius = center.norm() + 1.0 / std::sqrt(2.0 * a);
  return v;
}

PotentialSpec anisotropic_quadratic(double a, double b, double angle) {
  if (!(a > 0.0 && b > 0.0)) throw PreconditionError("anisotropic quadratic needs a, b > 0");
  PotentialSpec v;
  v.name = "anisotropic_quadratic";
  v.params = {{"a", a}, {"b", b}, {"angle", angle}};
  v.evaluate = [a, b, angle](Vec2 x) {
    const Vec2 u = rotate(x, -angle);
    return a * u.x * u.x + b * u.y * u.y;
  };
  v.laplacian = [a, b](Vec2) { return 2.0 * (a + b); };
  v.growth_exponent = 2.0;
  v.laplacian_floor = 2.0 * (a + b);
  v.support_radius = 1.5 / std::sqrt(std::min(a, b));
  return v;
}

PotentialSpec quadratic_quartic(double a, double b) {
  if (!(a > 0.0 && b >= 0.0)) throw PreconditionError("quadratic_quartic needs a > 0, b >= 0");
  PotentialSpec v;
  v.name = "quadratic_quartic";
  v.params = {{"a", a}, {"b", b}};
  v.evaluate = [a, b](Vec2 x) {
    const double r2 = x.norm2();
    return a * r2 + b * r2 * r2;
  };
  v.laplacian = [a, b](Vec2 x) { return 4.0 * a + 16.0 * b * x.norm2(); };
  v.growth_exponent = b > 0.0 ? 4.0 : 2.0;
  v.laplacian_floor = 4.0 * a;
  v.support_radius = 1.0 / std::sqrt(2.0 * a);
  return v;
}

PotentialSpec box_well(double half_width, double stiffness) {
  if (!(half_width > 0.0 && stiffness > 0.0)) throw PreconditionError("box_well needs L, k > 0");
  PotentialSpec v;
  v.name = "box_well";
  v.params = {{"half_width", half_width}, {"stiffness", stiffness}};
  v.evaluate = [half_width, stiffness](Vec2 x) {
    const double dx = std::max(std::fabs(x.x) - half_width, 0.0);
    const double dy = std::max(std::fabs(x.y) - half_width, 0.0);
    return stiffness * (dx * dx + dy * dy);
  };
  v.laplacian = [half_width, stiffness](Vec2 x) {
    return 2.0 * stiffness * ((std::fabs(x.x) > half_width ? 1.0 : 0.0) +
                              (std::fabs(x.y) > half_width ? 1.0 : 0.0));
  };
  v.growth_exponent = 2.0;
  v.laplacian_floor = 0.0;
  v.support_radius = half_width * std::numbers::sqrt2;
  return v;
}

PotentialSpec from_name(const std::string& name, const std::map<std::string, double>& params) {
  auto get = [&](const char* key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  PotentialSpec v;
  if (name == "quadratic") {
    v = quadratic(get("a", 1.0), {get("cx", 0.0), get("cy", 0.0)}, get("shift", 0.0));
  } else if (name == "anisotropic_quadratic") {
    v = anisotropic_quadratic(get("a", 1.0), get("b", 1.0), get("angle", 0.0));
  } else if (name == "quadratic_quartic") {
    v = quadratic_quartic(get("a", 1.0), get("b", 0.0));
  } else if (name == "box_well") {
    v = box_well(get("half_width", 1.0), get("stiffness", 1e4));
  } else {
    throw PreconditionError("unknown potential '" + name + "'");
  }
  return v;
}

}  // namespace potentials

}  // namespace coulomb2d
