#include "coulomb2d/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "coulomb2d/energy.hpp"
#include "coulomb2d/errors.hpp"
#include "coulomb2d/kernel.hpp"
#include "coulomb2d/quadrature.hpp"

namespace coulomb2d {

namespace {

constexpr double kPi = std::numbers::pi;

double sqrt_n(std::size_t n) { return std::sqrt(static_cast<double>(n)); }

double log_mean_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s / static_cast<double>(v.size()));
}

std::vector<std::size_t> archive_groups(std::span<const SampleArchive> archives) {
  std::vector<std::size_t> g;
  for (const auto& a : archives) g.push_back(a.frames());
  return g;
}

// At least `min_groups` batches: the given groups if there are two or more,
// otherwise contiguous near-equal batches of the single series.
std::vector<std::size_t> batches(std::vector<std::size_t> groups, std::size_t min_groups) {
  if (groups.size() >= 2) return groups;
  const std::size_t total = std::accumulate(groups.begin(), groups.end(), std::size_t{0});
  const std::size_t b = std::max<std::size_t>(2, std::min(min_groups, total));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < b; ++i) out.push_back(total * (i + 1) / b - total * i / b);
  return out;
}

// Weighted batch-means standard error of a ratio estimator: num_g / den_g per
// batch against the pooled ratio.
double batch_std_err(std::span<const double> num, std::span<const double> den) {
  const std::size_t G = num.size();
  if (G < 2) return std::numeric_limits<double>::infinity();
  const double N = std::accumulate(num.begin(), num.end(), 0.0);
  const double D = std::accumulate(den.begin(), den.end(), 0.0);
  const double r = N / D;
  double s = 0.0;
  for (std::size_t g = 0; g < G; ++g) s += (num[g] - r * den[g]) * (num[g] - r * den[g]);
  return std::sqrt(s * static_cast<double>(G) / static_cast<double>(G - 1)) / D;
}

struct MeanEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  double ess = 0.0;
};

MeanEstimate mean_with_error(std::span<const double> v, std::span<const std::size_t> groups) {
  MeanEstimate m;
  const double n = static_cast<double>(v.size());
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double var = 0.0;
  for (double x : v) var += (x - m.mean) * (x - m.mean);
  var /= std::max(n - 1.0, 1.0);
  m.ess = effective_sample_size(v, groups);
  m.std_err = std::sqrt(var / m.ess);
  return m;
}

MomentEstimate exp_moment(std::span<const double> exponents, std::span<const std::size_t> groups) {
  MomentEstimate out;
  const double shift = *std::max_element(exponents.begin(), exponents.end());
  std::vector<double> w(exponents.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(exponents[i] - shift);
  const MeanEstimate m = mean_with_error(w, groups);
  const double scale = std::exp(shift);
  out.value = m.mean * scale;
  out.ci = {std::max(0.0, (m.mean - 1.96 * m.std_err) * scale), (m.mean + 1.96 * m.std_err) * scale};
  out.effective_frames = m.ess;
  return out;
}

}  // namespace

// -- point processes ------------------------------------------------------------

PointProcessSample local_process(std::span<const Vec2> X, Vec2 origin, const Box& window) {
  PointProcessSample s;
  s.window = window;
  s.origin = origin;
  s.n_source = X.size();
  const double scale = sqrt_n(X.size());
  for (const Vec2& x : X) {
    const Vec2 p = scale * (x - origin);
    if (window.contains(p)) s.points.push_back(p);
  }
  return s;
}

std::vector<PointProcessSample> local_processes(std::span<const SampleArchive> archives, Vec2 origin,
                                                const Box& window) {
  std::vector<PointProcessSample> out;
  for (const auto& a : archives)
    for (std::size_t f = 0; f < a.frames(); ++f) {
      out.push_back(local_process(a.frame(f), origin, window));
      out.back().replica = a.replica;
      out.back().frame = f;
    }
  return out;
}

std::vector<PointProcessSample> synthetic_poisson(double lambda, const Box& window, std::size_t frames,
                                                  Xoshiro256& rng, std::size_t replicas) {
  if (!(lambda >= 0.0)) throw PreconditionError("Poisson intensity must be nonnegative");
  replicas = std::max<std::size_t>(replicas, 1);
  std::vector<PointProcessSample> out(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    auto& s = out[f];
    s.window = window;
    s.replica = f * replicas / std::max<std::size_t>(frames, 1);
    s.frame = f;
    const std::uint64_t n = rng.poisson(lambda * window.area());
    for (std::uint64_t i = 0; i < n; ++i) {
      const double u = rng.uniform(), v = rng.uniform();
      s.points.push_back({window.center.x + (2.0 * u - 1.0) * window.half.x,
                          window.center.y + (2.0 * v - 1.0) * window.half.y});
    }
  }
  return out;
}

std::vector<std::size_t> replica_groups(std::span<const PointProcessSample> samples) {
  std::vector<std::size_t> g;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i == 0 || samples[i].replica != samples[i - 1].replica) g.push_back(0);
    ++g.back();
  }
  return g;
}

// -- time series ------------------------------------------------------------------

double integrated_autocorrelation(std::span<const double> x, double c) {
  const std::size_t n = x.size();
  if (n < 2) return 1.0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (c0 <= 0.0) return 1.0;
  double tau = 1.0;
  for (std::size_t M = 1; M < n / 2; ++M) {
    tau += 2.0 * autocov(M) / c0;
    if (static_cast<double>(M) >= c * tau) break;
  }
  return std::max(tau, 1.0);
}

double effective_sample_size(std::span<const double> series, std::span<const std::size_t> groups) {
  double ess = 0.0;
  std::size_t at = 0;
  for (std::size_t len : groups) {
    if (at + len > series.size()) throw PreconditionError("group lengths exceed the series");
    ess += static_cast<double>(len) / integrated_autocorrelation(series.subspan(at, len));
    at += len;
  }
  return ess;
}

double effective_sample_size(std::span<const double> series) {
  const std::size_t g[] = {series.size()};
  return effective_sample_size(series, g);
}

double kolmogorov_tail(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    // P(K <= x) = sqrt(2 pi) / x sum exp(-(2k - 1)^2 pi^2 / (8 x^2))
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double m = 2.0 * k - 1.0;
      s += std::exp(-m * m * kPi * kPi / (8.0 * x * x));
    }
    return std::clamp(1.0 - std::sqrt(2.0 * kPi) / x * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 20; ++k) s += (k % 2 ? 2.0 : -2.0) * std::exp(-2.0 * k * k * x * x);
  return std::clamp(s, 0.0, 1.0);
}

KsResult ks_uniform(std::vector<double> v) {
  if (v.empty()) throw StatisticsError("KS test needs data");
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double u = std::clamp(v[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u, u - static_cast<double>(i) / n});
  }
  const double rn = std::sqrt(n);
  return {d, kolmogorov_tail((rn + 0.12 + 0.11 / rn) * d)};
}

// -- fluctuation potentials -------------------------------------------------------

double ThermalPotential::operator()(Vec2 y) const {
  const GridGeometry& g = sol_->potential.geometry;
  const double lo_x = g.origin.x + 0.5 * g.cell, lo_y = g.origin.y + 0.5 * g.cell;
  const Vec2 up = g.upper();
  if (y.x >= lo_x && y.y >= lo_y && y.x <= up.x - 0.5 * g.cell && y.y <= up.y - 0.5 * g.cell)
    return sol_->potential.interpolate(y);
  return grid_potential(sol_->mu_theta, y);
}

double fluct_potential(std::span<const Vec2> X, const ThermalSolution& sol, Vec2 y) {
  double s = 0.0;
  for (const Vec2& x : X) s += kernel::coulomb_g(y - x);
  return s / static_cast<double>(X.size()) - ThermalPotential(sol)(y);
}

double smeared_fluct_potential(std::span<const Vec2> X, const ThermalSolution& sol, Vec2 y,
                               kernel::SmearingRadius eta) {
  double s = 0.0;
  for (const Vec2& x : X) s += kernel::psi_smeared_g(y - x, eta);
  const double smoothed = ThermalPotential(sol)(y) - smoothing_background(sol, y, eta);
  return s / static_cast<double>(X.size()) - smoothed;
}

TailCurve concentration_tail(std::span<const SampleArchive> archives, const ThermalSolution& sol,
                             std::span<const Vec2> y_points, const std::vector<double>& T_grid, double C) {
  if (archives.empty() || y_points.empty()) throw StatisticsError("concentration_tail needs archives and points");
  const std::size_t n = archives.front().n;
  const double beta = archives.front().config.beta;
  const double k = static_cast<double>(y_points.size());
  const ThermalPotential h(sol);
  std::vector<double> hy;
  for (Vec2 y : y_points) hy.push_back(h(y));
  std::vector<double> stat;
  for (const auto& a : archives)
    for (std::size_t f = 0; f < a.frames(); ++f) {
      const auto X = a.frame(f);
      double s = 0.0;
      bool hit = false;
      for (std::size_t j = 0; j < y_points.size(); ++j) {
        double sum = 0.0;
        for (const Vec2& x : X) {
          const double r2 = (y_points[j] - x).norm2();
          if (r2 == 0.0) hit = true;
          else sum -= 0.5 * std::log(r2);
        }
        s += sum / static_cast<double>(n) - hy[j];
      }
      stat.push_back(hit ? std::numeric_limits<double>::infinity() : std::abs(s));
    }
  if (stat.empty()) throw StatisticsError("concentration_tail needs frames");
  std::vector<double> finite = stat;
  for (double& v : finite) v = std::min(v, 1e300);
  const auto groups = archive_groups(archives);
  const double n_eff = std::min(effective_sample_size(finite, groups), static_cast<double>(stat.size()));
  const double frames = static_cast<double>(stat.size());
  TailCurve t;
  t.effective_samples = n_eff;
  for (double T : T_grid) {
    const double level = k * T / sqrt_n(n);
    double hits = 0.0;
    for (double v : stat) hits += v >= level;
    const double p = hits / frames;
    const Interval ci = wilson_interval(p * n_eff, n_eff);
    t.thresholds.push_back(T);
    t.empirical.push_back(p);
    t.ci_lo.push_back(ci.lo);
    t.ci_hi.push_back(ci.hi);
    t.bound.push_back(4.0 * k * (std::exp(-0.5 * T * sqrt_n(n)) + std::exp(-beta * T * static_cast<double>(n))));
    t.asserted.push_back(T >= C * std::log(static_cast<double>(n)));
  }
  return t;
}

// -- correlation functions ------------------------------------------------------

double CorrelationEstimate::mean() const {
  return values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

nlohmann::json CorrelationEstimate::to_json() const {
  nlohmann::json j;
  j["k"] = k;
  j["per_side"] = bins.per_side;
  j["reach"] = bins.reach;
  j["frames_used"] = frames_used;
  j["mean"] = mean();
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t b = 0; b < values.size(); ++b)
    cells.push_back({{"x", centers[b].x}, {"y", centers[b].y}, {"value", values[b]}, {"std_err", std_err[b]}});
  j["bins"] = cells;
  return j;
}

CorrelationEstimate estimate_correlation(std::span<const PointProcessSample> samples, int k,
                                         const CorrelationBins& bins, std::size_t min_frames,
                                         std::size_t min_groups) {
  if (k != 1 && k != 2) throw PreconditionError("only k = 1 and k = 2 correlations are estimated");
  if (samples.size() < min_frames)
    throw StatisticsError("estimate_correlation needs at least " + std::to_string(min_frames) + " frames, got " +
                          std::to_string(samples.size()));
  if (bins.per_side < 1) throw PreconditionError("need at least one bin per side");
  const Box W = samples.front().window;
  const std::size_t nb = bins.per_side;
  CorrelationEstimate est;
  est.k = k;
  est.bins = bins;
  est.frames_used = samples.size();

  // Bin layout: k = 1 tiles the window, k = 2 tiles the displacement square.
  const Vec2 lo = k == 1 ? W.center - W.half : Vec2{-bins.reach, -bins.reach};
  const Vec2 width = k == 1 ? 2.0 * W.half : Vec2{2.0 * bins.reach, 2.0 * bins.reach};
  const Vec2 step{width.x / static_cast<double>(nb), width.y / static_cast<double>(nb)};
  Box inner = W;
  if (k == 2) {
    inner.half = W.half - Vec2{bins.reach, bins.reach};
    if (inner.half.x <= 0.0 || inner.half.y <= 0.0) throw PreconditionError("reach exceeds the window half-width");
  }
  auto bin_of = [&](Vec2 p) -> std::optional<std::size_t> {
    const double u = (p.x - lo.x) / step.x, v = (p.y - lo.y) / step.y;
    if (u < 0.0 || v < 0.0 || u > static_cast<double>(nb) || v > static_cast<double>(nb)) return std::nullopt;
    const std::size_t i = std::min(static_cast<std::size_t>(u), nb - 1);
    const std::size_t j = std::min(static_cast<std::size_t>(v), nb - 1);
    return j * nb + i;
  };
  for (std::size_t j = 0; j < nb; ++j)
    for (std::size_t i = 0; i < nb; ++i)
      est.centers.push_back({lo.x + (static_cast<double>(i) + 0.5) * step.x, lo.y + (static_cast<double>(j) + 0.5) * step.y});

  const auto groups = batches(replica_groups(samples), min_groups);
  const std::size_t G = groups.size();
  std::vector<std::vector<double>> counts(G, std::vector<double>(nb * nb, 0.0));
  std::vector<double> frames_in(G, 0.0);
  std::size_t at = 0;
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t f = at; f < at + groups[g]; ++f) {
      const auto& pts = samples[f].points;
      if (k == 1) {
        for (const Vec2& p : pts)
          if (auto b = bin_of(p)) counts[g][*b] += 1.0;
      } else {
        for (std::size_t a = 0; a < pts.size(); ++a) {
          if (!inner.contains(pts[a])) continue;
          for (std::size_t c = 0; c < pts.size(); ++c) {
            if (c == a) continue;
            const Vec2 d = pts[c] - pts[a];
            if (std::abs(d.x) > bins.reach || std::abs(d.y) > bins.reach) continue;
            if (auto b = bin_of(d)) counts[g][*b] += 1.0;
          }
        }
      }
    }
    frames_in[g] = static_cast<double>(groups[g]);
    at += groups[g];
  }
  const double bin_area = step.x * step.y;
  const double base = k == 1 ? bin_area : bin_area * inner.area();
  const double F = static_cast<double>(samples.size());
  std::vector<double> num(G), den(G);
  for (std::size_t b = 0; b < nb * nb; ++b) {
    double total = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      num[g] = counts[g][b];
      den[g] = frames_in[g] * base;
      total += counts[g][b];
    }
    est.values.push_back(total / (F * base));
    est.std_err.push_back(batch_std_err(num, den));
  }
  return est;
}

// -- Poisson tests -----------------------------------------------------------------

std::vector<double> window_counts(std::span<const PointProcessSample> samples, const Box& w) {
  std::vector<double> c;
  c.reserve(samples.size());
  for (const auto& s : samples) {
    double n = 0.0;
    for (const Vec2& p : s.points) n += w.contains(p);
    c.push_back(n);
  }
  return c;
}

nlohmann::json PoissonTest::to_json() const {
  return {{"lambda", lambda},       {"expected", expected}, {"mean_count", mean_count},
          {"chi_square", chi_square}, {"dof", dof},         {"p_value", p_value},
          {"tv", tv},               {"frames", frames},     {"effective_frames", effective_frames},
          {"histogram", histogram}};
}

PoissonTest poisson_count_test(std::span<const PointProcessSample> samples, const Box& sub, double lambda,
                               double min_effective) {
  if (samples.empty()) throw StatisticsError("poisson_count_test needs frames");
  if (!(lambda > 0.0)) throw PreconditionError("Poisson intensity must be positive");
  const std::vector<double> counts = window_counts(samples, sub);
  const auto groups = replica_groups(samples);
  PoissonTest t;
  t.lambda = lambda;
  t.expected = lambda * sub.area();
  t.frames = counts.size();
  t.effective_frames = std::min(effective_sample_size(counts, groups), static_cast<double>(t.frames));
  if (t.effective_frames < min_effective)
    throw StatisticsError("poisson_count_test needs " + std::to_string(min_effective) + " effective frames, have " +
                          std::to_string(t.effective_frames));
  std::size_t top = 0;
  for (double c : counts) top = std::max(top, static_cast<std::size_t>(c));
  t.histogram.assign(top + 1, 0);
  double sum = 0.0;
  for (double c : counts) {
    ++t.histogram[static_cast<std::size_t>(c)];
    sum += c;
  }
  const double F = static_cast<double>(t.frames);
  t.mean_count = sum / F;

  // Poisson pmf up to well past both the data and the mean.
  const std::size_t reach = std::max<std::size_t>(top + 1, static_cast<std::size_t>(t.expected + 10.0 * std::sqrt(t.expected) + 10.0));
  std::vector<double> pmf(reach);
  pmf[0] = std::exp(-t.expected);
  for (std::size_t c = 1; c < reach; ++c) pmf[c] = pmf[c - 1] * t.expected / static_cast<double>(c);
  auto observed = [&](std::size_t c) { return c < t.histogram.size() ? static_cast<double>(t.histogram[c]) : 0.0; };

  // Total variation, with the unobserved Poisson tail.
  double tv = 0.0, covered = 0.0;
  for (std::size_t c = 0; c <= top; ++c) {
    tv += std::abs(observed(c) / F - pmf[c]);
    covered += pmf[c];
  }
  t.tv = 0.5 * (tv + std::max(0.0, 1.0 - covered));

  // Chi-square over cells pooled left to right to expected >= 5; the last
  // cell absorbs the upper tail.
  std::vector<double> obs, exp;
  double o = 0.0, e = 0.0, cum = 0.0;
  for (std::size_t c = 0; c < reach; ++c) {
    o += observed(c);
    e += F * pmf[c];
    cum += pmf[c];
    if (e >= 5.0 && F * (1.0 - cum) >= 5.0) {
      obs.push_back(o);
      exp.push_back(e);
      o = e = 0.0;
    }
  }
  e = F - std::accumulate(exp.begin(), exp.end(), 0.0);
  o = F - std::accumulate(obs.begin(), obs.end(), 0.0);
  if (e >= 5.0 || exp.empty()) {
    obs.push_back(o);
    exp.push_back(e);
  } else {
    obs.back() += o;
    exp.back() += e;
  }
  double chi = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) chi += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
  // Serial correlation inflates the statistic by about frames / ESS.
  t.chi_square = chi * t.effective_frames / F;
  t.dof = obs.size() - 1;
  t.p_value = t.dof == 0 ? 1.0 : boost::math::gamma_q(0.5 * static_cast<double>(t.dof), 0.5 * t.chi_square);
  return t;
}

WindowCorrelation window_count_correlation(std::span<const PointProcessSample> samples, const Box& a, const Box& b) {
  const auto ca = window_counts(samples, a), cb = window_counts(samples, b);
  if (ca.size() < 3) throw StatisticsError("window correlation needs frames");
  const double n = static_cast<double>(ca.size());
  const double ma = std::accumulate(ca.begin(), ca.end(), 0.0) / n, mb = std::accumulate(cb.begin(), cb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    sab += (ca[i] - ma) * (cb[i] - mb);
    saa += (ca[i] - ma) * (ca[i] - ma);
    sbb += (cb[i] - mb) * (cb[i] - mb);
  }
  const auto groups = replica_groups(samples);
  const double ess = std::min({effective_sample_size(ca, groups), effective_sample_size(cb, groups), n});
  WindowCorrelation w;
  w.r = saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
  w.sigma = 1.0 / std::sqrt(ess);
  return w;
}

// -- functionals -------------------------------------------------------------------

LaplaceResult laplace_functional(std::span<const PointProcessSample> samples, const std::function<double(Vec2)>& f,
                                 double lambda) {
  if (samples.empty()) throw StatisticsError("laplace_functional needs frames");
  std::vector<double> v;
  v.reserve(samples.size());
  for (const auto& s : samples) {
    double sum = 0.0;
    for (const Vec2& p : s.points) sum += f(p);
    if (sum < 0.0) throw PreconditionError("Laplace test function must be nonnegative");
    v.push_back(std::exp(-sum));
  }
  const auto groups = replica_groups(samples);
  const MeanEstimate m = mean_with_error(v, groups);
  LaplaceResult r;
  r.value = m.mean;
  r.std_err = m.std_err;
  // int_W (1 - e^{-f}) by 16 x 16 subcells with 6-point rules
  const Box& W = samples.front().window;
  constexpr std::size_t sub = 16;
  const auto& gl = gauss_legendre<6>();
  const double hx = 2.0 * W.half.x / sub, hy = 2.0 * W.half.y / sub;
  double integral = 0.0;
  for (std::size_t j = 0; j < sub; ++j)
    for (std::size_t i = 0; i < sub; ++i)
      for (std::size_t a = 0; a < gl.nodes.size(); ++a)
        for (std::size_t b = 0; b < gl.nodes.size(); ++b) {
          const Vec2 p{W.center.x - W.half.x + hx * (static_cast<double>(i) + 0.5 * (1.0 + gl.nodes[a])),
                       W.center.y - W.half.y + hy * (static_cast<double>(j) + 0.5 * (1.0 + gl.nodes[b]))};
          integral += 0.25 * hx * hy * gl.weights[a] * gl.weights[b] * (1.0 - std::exp(-f(p)));
        }
  r.reference = std::exp(-lambda * integral);
  return r;
}

double test_function_norm(const TestFunction& phi, const GridGeometry& g) {
  double l2 = 0.0, sup = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double m = phi.gradient(g.center(k)).norm();
    l2 += m * m * g.cell_area();
    sup = std::max(sup, m);
  }
  return std::sqrt(l2) + sup;
}

nlohmann::json LinearStatisticReport::to_json() const {
  return {{"mean", mean},           {"variance", variance}, {"norm", norm},
          {"log_moment", log_moment}, {"bound", bound},     {"holds", holds()},
          {"frames", values.size()}};
}

LinearStatisticReport linear_statistic(std::span<const SampleArchive> archives, const ThermalSolution& sol,
                                       const TestFunction& phi, double C) {
  if (archives.empty()) throw StatisticsError("linear_statistic needs archives");
  const double beta = archives.front().config.beta;
  if (beta > 0.5) throw PreconditionError("linear_statistic moment bound needs beta <= 1/2");
  const double N = static_cast<double>(archives.front().n);
  const double mean_field = N * sol.mu_theta.integrate(phi.value) / sol.mu_theta.mass();
  LinearStatisticReport r;
  for (const auto& a : archives)
    for (std::size_t f = 0; f < a.frames(); ++f) {
      double s = 0.0;
      for (const Vec2& x : a.frame(f)) s += phi.value(x);
      r.values.push_back(s - mean_field);
    }
  if (r.values.empty()) throw StatisticsError("linear_statistic needs frames");
  const double n = static_cast<double>(r.values.size());
  r.mean = std::accumulate(r.values.begin(), r.values.end(), 0.0) / n;
  for (double v : r.values) r.variance += (v - r.mean) * (v - r.mean);
  r.variance /= std::max(n - 1.0, 1.0);
  r.norm = test_function_norm(phi, sol.mu_theta.geometry());
  if (r.norm > 0.0) {
    std::vector<double> e;
    for (double v : r.values) e.push_back(beta / (C * r.norm * r.norm) * v * v);
    r.log_moment = log_mean_exp(e);
  }
  r.bound = C * beta * std::abs(std::log(beta)) * N;
  return r;
}

bool MomentEstimate::holds() const {
  if (!asserted) return true;
  return ci.hi >= bound_lo && ci.lo <= bound_hi;
}

nlohmann::json MomentEstimate::to_json() const {
  return {{"value", value},       {"ci_lo", ci.lo},       {"ci_hi", ci.hi},
          {"bound_lo", bound_lo}, {"bound_hi", bound_hi}, {"asserted", asserted},
          {"holds", holds()},     {"effective_frames", effective_frames}};
}

MomentEstimate thermal_weight_moment(std::span<const SampleArchive> archives, const ThermalSolution& sol, double k,
                                     double C) {
  if (archives.empty()) throw StatisticsError("thermal_weight_moment needs archives");
  const double beta = archives.front().config.beta;
  const double N = static_cast<double>(archives.front().n);
  const ThermalPotential h(sol);
  const double mean_field = N * sol.mu_theta.integrate_field(sol.potential) / sol.mu_theta.mass();
  std::vector<double> w;
  for (const auto& a : archives)
    for (std::size_t f = 0; f < a.frames(); ++f) {
      double s = 0.0;
      for (const Vec2& x : a.frame(f)) s += h(x);
      w.push_back(2.0 * beta * k * (s - mean_field));
    }
  if (w.empty()) throw StatisticsError("thermal_weight_moment needs frames");
  MomentEstimate m = exp_moment(w, archive_groups(archives));
  m.bound_lo = std::exp(-C * k);
  m.bound_hi = std::exp(C * k);
  m.asserted = beta <= 1.0 / (std::sqrt(N) * std::log(N));
  return m;
}

nlohmann::json OnePointRatio::to_json() const {
  nlohmann::json cells = nlohmann::json::array();
  for (std::size_t c = 0; c < ratios.size(); ++c)
    cells.push_back({{"x", bulk.center(c).x}, {"y", bulk.center(c).y}, {"ratio", ratios[c]}, {"std_err", std_err[c]}});
  return {{"cells", cells},           {"sup_deviation", sup_deviation}, {"stat_error", stat_error},
          {"floor", floor},           {"holds", holds()}};
}

OnePointRatio one_point_ratio(std::span<const SampleArchive> archives, const ThermalSolution& sol,
                              const GridGeometry& bulk, double C, double gamma) {
  if (archives.empty()) throw StatisticsError("one_point_ratio needs archives");
  const double beta = archives.front().config.beta;
  const std::size_t n = archives.front().n;
  OnePointRatio out;
  out.bulk = bulk;

  // Frame batches: replicas, or 8 contiguous batches of a single replica.
  std::vector<std::span<const Vec2>> frames;
  for (const auto& a : archives)
    for (std::size_t f = 0; f < a.frames(); ++f) frames.push_back(a.frame(f));
  if (frames.empty()) throw StatisticsError("one_point_ratio needs frames");
  const auto groups = batches(archive_groups(archives), 8);
  const std::size_t G = groups.size();
  std::vector<std::vector<double>> counts(G, std::vector<double>(bulk.size(), 0.0));
  std::size_t at = 0;
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t f = at; f < at + groups[g]; ++f)
      for (const Vec2& x : frames[f])
        if (auto c = bulk.locate(x)) counts[g][*c] += 1.0;
    at += groups[g];
  }

  // Cell averages of mu_theta by a 4 x 4 Gauss rule on the interpolated log density.
  const auto& gl = gauss_legendre<4>();
  const double mass = sol.mu_theta.mass();
  std::vector<double> num(G), den(G);
  for (std::size_t c = 0; c < bulk.size(); ++c) {
    const Vec2 ctr = bulk.center(c);
    double avg = 0.0;
    for (std::size_t a = 0; a < gl.nodes.size(); ++a)
      for (std::size_t b = 0; b < gl.nodes.size(); ++b) {
        const Vec2 p{ctr.x + 0.5 * bulk.cell * gl.nodes[a], ctr.y + 0.5 * bulk.cell * gl.nodes[b]};
        avg += 0.25 * gl.weights[a] * gl.weights[b] * std::exp(sol.log_density.interpolate(p));
      }
    avg /= mass;
    double total = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      num[g] = counts[g][c];
      den[g] = static_cast<double>(groups[g]) * static_cast<double>(n) * bulk.cell_area() * avg;
      total += counts[g][c];
    }
    const double expected = static_cast<double>(frames.size()) * static_cast<double>(n) * bulk.cell_area() * avg;
    out.ratios.push_back(total / expected);
    out.std_err.push_back(batch_std_err(num, den));
    out.sup_deviation = std::max(out.sup_deviation, std::abs(out.ratios.back() - 1.0));
    out.stat_error = std::max(out.stat_error, out.std_err.back());
  }
  out.floor = C * beta * std::pow(static_cast<double>(n), 0.5 * (1.0 + gamma));
  return out;
}

MomentEstimate smoothing_moment_check(std::span<const SampleArchive> archives, const ThermalSolution& sol, Vec2 x,
                                      double t, kernel::SmearingRadius eta, double C) {
  if (!(t > 0.0 && t < 2.0)) throw PreconditionError("smoothing moment needs t in (0, 2)");
  if (archives.empty()) throw StatisticsError("smoothing_moment_check needs archives");
  const double beta = archives.front().config.beta;
  const double N = static_cast<double>(archives.front().n);
  const double e = eta.value();
  if (e > 1.0 / std::sqrt(N * beta) * (1.0 + 1e-12))
    throw PreconditionError("smoothing radius must be at most (N beta)^{-1/2}");
  const double background = smoothing_background(sol, x, eta);
  std::vector<double> w;
  for (const auto& a : archives)
    for (std::size_t f = 0; f < a.frames(); ++f) {
      double points = 0.0;
      for (const Vec2& p : a.frame(f)) {
        const double r = (x - p).norm();
        if (r == 0.0) throw SingularityError("evaluation point coincides with a particle");
        if (r < 2.0 * e) points += -std::log(r) - kernel::psi_smeared_g_radial(r, e);
      }
      w.push_back(t * N * (points / N - background));
    }
  if (w.empty()) throw StatisticsError("smoothing_moment_check needs frames");
  MomentEstimate m = exp_moment(w, archive_groups(archives));
  m.bound_lo = 0.0;
  m.bound_hi = std::exp(C * N * e * e / (2.0 - t));
  m.asserted = true;
  return m;
}

}  // namespace coulomb2d
