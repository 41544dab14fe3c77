#include "coulomb2d/intervals.hpp"

#include <algorithm>
#include <cmath>

#include "coulomb2d/errors.hpp"

namespace coulomb2d {

Interval wilson_interval(double successes, double n, double z) {
  if (!(n > 0.0)) throw StatisticsError("Wilson interval needs a positive sample size");
  const double p = std::clamp(successes / n, 0.0, 1.0);
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::size_t TailCurve::violations() const {
  std::size_t v = 0;
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    if (asserted[i] && ci_lo[i] > bound[i]) ++v;
  return v;
}

nlohmann::json TailCurve::to_json() const {
  nlohmann::json j;
  j["thresholds"] = thresholds;
  j["empirical"] = empirical;
  j["ci_lo"] = ci_lo;
  j["ci_hi"] = ci_hi;
  j["bound"] = bound;
  std::vector<int> a(asserted.begin(), asserted.end());
  j["asserted"] = a;
  j["effective_samples"] = effective_samples;
  j["violations"] = violations();
  j["pass"] = passed();
  return j;
}

}  // namespace coulomb2d
