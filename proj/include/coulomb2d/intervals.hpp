#pragma once

#include <cstddef>
#include <vector>

#include <json.hpp>

namespace coulomb2d {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval for a binomial proportion; n may be an effective
/// (non-integer) sample size. z = 1.96 is the two-sided 95% level.
Interval wilson_interval(double successes, double n, double z = 1.96);

/// Empirical tail probabilities against a reference bound. A threshold is
/// violated only if it is asserted and the lower CI exceeds the bound.
struct TailCurve {
  std::vector<double> thresholds;
  std::vector<double> empirical;
  std::vector<double> ci_lo;
  std::vector<double> ci_hi;
  std::vector<double> bound;
  std::vector<bool> asserted;
  double effective_samples = 0.0;

  std::size_t violations() const;
  bool passed() const { return violations() == 0; }
  nlohmann::json to_json() const;
};

}  // namespace coulomb2d
