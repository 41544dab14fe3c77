// Acceptance suite: one PASS/FAIL line per criterion, plus indented detail
// lines. Exit status is nonzero if any criterion fails.
//
//   acceptance [id ...]   run only the listed criteria (1..11)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "coulomb2d/cli.hpp"
#include "coulomb2d/statistics.hpp"
#include "coulomb2d/verify.hpp"

using namespace coulomb2d;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void verdict(int id, const char* name, bool pass, double secs, double budget, const std::string& detail) {
  const bool in_time = secs <= budget;
  const bool ok = pass && in_time;
  failures += !ok;
  std::printf("[%s] %2d %-28s %s (%.1fs of %.0fs)\n", ok ? "PASS" : "FAIL", id, name, detail.c_str(), secs, budget);
  if (pass && !in_time) std::printf("       over the runtime budget\n");
  std::fflush(stdout);
}

void info(const std::string& s) {
  std::printf("       %s\n", s.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. splitting identity under grid refinement
void splitting() {
  const auto t0 = Clock::now();
  verify::SplittingOptions o;  // N = 256, theta = N^{1/4} = 4, 512^2 fine grid
  const auto s = verify::splitting_study(potentials::quadratic(), o);
  const bool pass = s.fine.size() == 20 && s.max_relative <= 5e-3 && s.min_ratio >= 3.0;
  verdict(1, "splitting identity", pass, seconds_since(t0), 120,
          fmt("max rel residual %.3e, min coarse/fine %.3f", s.max_relative, s.min_ratio));
}

// 2. Fourier and real-space energies of smooth dipoles
void energy_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t count = 0;
  for (const auto& nu : verify::dipole_family(verify::family_grid(), 10)) {
    worst = std::max(worst, verify::energy_oracle(nu).relative);
    ++count;
  }
  verdict(2, "energy oracle", count == 10 && worst <= 1e-4, seconds_since(t0), 30,
          fmt("worst relative difference %.2e over %zu dipoles", worst, count));
}

// 3. thermal Euler-Lagrange residual and convergence to mu_V
void thermal_residual() {
  const auto t0 = Clock::now();
  const auto V = potentials::quadratic();
  const auto g = GridGeometry::centered(1.25, 256);
  const EquilibriumSolution eq = solve_equilibrium(V, g);
  bool pass = true;
  double prev = std::numeric_limits<double>::infinity();
  std::string detail;
  for (double theta : {1e2, 1e3, 1e4}) {
    const ThermalSolution sol = solve_thermal(V, theta, g);
    const double l1 = l1_distance(sol.mu_theta, eq.mu);
    pass = pass && sol.residual <= 1e-6 && l1 < prev;
    prev = l1;
    detail += fmt("theta %.0e: res %.1e L1 %.3f; ", theta, sol.residual, l1);
  }
  detail.resize(detail.size() - 2);
  verdict(3, "thermal EL residual", pass, seconds_since(t0), 120, detail);
}

// 4. regularization gap never above its bound
void regularization() {
  const auto t0 = Clock::now();
  verify::RegularizationOptions o;  // N = 256, eta = 0.1 / sqrt(N), C = 10, 100 configurations
  const auto s = verify::regularization_study(potentials::quadratic(), o);
  verdict(4, "regularization inequality", s.gaps.size() == 100 && s.violations == 0, seconds_since(t0), 180,
          fmt("%zu violations in %zu configurations, max gap/bound %.3f", s.violations, s.gaps.size(),
              s.max_gap_over_bound));
}

// 5. min-energy floor against the stored regression value
constexpr double kMinEnergyFloor = 0.9427422007;

void min_energy() {
  const auto t0 = Clock::now();
  const auto s = verify::min_energy_study(0.05, 20);
  const bool pass = s.checks.size() == 20 && s.floor > 0.0 && std::abs(s.floor / kMinEnergyFloor - 1.0) <= 0.01;
  verdict(5, "min-energy floor", pass, seconds_since(t0), 60,
          fmt("floor %.10f, stored %.10f", s.floor, kMinEnergyFloor));
}

// 6-9. one gas run at N = 2048, beta = N^-0.9
void gas_run(const std::set<int>& ids) {
  const auto t0 = Clock::now();
  GasConfig c;
  c.n = 2048;
  c.beta_rule = "N^-0.9";
  c.beta = std::pow(2048.0, -0.9);
  c.seed = 11;
  c.replicas = 8;
  c.thinning = 4 * c.n;
  c.steps = c.effective_burn_in() + 125 * c.effective_thinning();
  const ThermalSolution sol = solve_thermal(c.potential, c.theta(), GridGeometry::centered(3.5, 256));
  const auto archives = run_replicas(c, sol, 8);
  const double run_secs = seconds_since(t0);
  info(fmt("gas run: N %zu, beta %.4g (theta %.3f), %zu replicas x %zu frames, %.1fs", c.n, c.beta, c.theta(),
           archives.size(), archives.front().frames(), run_secs));
  double acc_lo = 1.0, acc_hi = 0.0, drift = 0.0;
  for (const auto& a : archives) {
    acc_lo = std::min(acc_lo, a.stats.acceptance);
    acc_hi = std::max(acc_hi, a.stats.acceptance);
    drift = std::max(drift, a.stats.max_audit_drift);
  }
  info(fmt("acceptance %.3f..%.3f, energy audit drift %.1e", acc_lo, acc_hi, drift));

  // mu_V(0) from the equilibrium solver, on the thermal grid
  const EquilibriumSolution eq = solve_equilibrium(c.potential, sol.mu_theta.geometry());
  const double mu_v0 = eq.mu.density(*eq.mu.geometry().locate({0.0, 0.0}));
  const double mu_theta0 = std::exp(sol.log_density.interpolate({0.0, 0.0}));

  if (ids.count(6)) {
    const auto t = Clock::now();
    const auto pp = local_processes(archives, {0.0, 0.0});
    const Box unit = Box::square(1.0);
    const double ess = effective_sample_size(window_counts(pp, unit), replica_groups(pp));
    const PoissonTest pt = poisson_count_test(pp, unit, mu_v0, 0.0);
    const WindowCorrelation wc =
        window_count_correlation(pp, Box::square(1.0, {-1.0, 0.0}), Box::square(1.0, {1.0, 0.0}));
    const bool pass = ess >= 300 && pt.tv <= 0.05 && pt.p_value >= 0.01 && wc.within(3.0);
    verdict(6, "Poisson convergence", pass, run_secs + seconds_since(t), 900,
            fmt("ESS %.0f, lambda mu_V(0) %.4f: mean %.3f TV %.3f p %.2g, window r %.3f (sigma %.3f)", ess, mu_v0,
                pt.mean_count, pt.tv, pt.p_value, wc.r, wc.sigma));
    const PoissonTest pt2 = poisson_count_test(pp, unit, mu_theta0, 0.0);
    info(fmt("same counts against Poisson(mu_theta(0) = %.4f): TV %.3f, p %.2g", mu_theta0, pt2.tv, pt2.p_value));
  }
  if (ids.count(7)) {
    const auto t = Clock::now();
    const OnePointRatio r = one_point_ratio(archives, sol, GridGeometry::centered(0.5, 8), 1.0, 0.1);
    verdict(7, "one-point ratio", r.holds(), run_secs + seconds_since(t), 900,
            fmt("sup |ratio - 1| %.4f, 3 x stat %.4f, floor %.4f", r.sup_deviation, 3.0 * r.stat_error, r.floor));
  }
  if (ids.count(8)) {
    const auto t = Clock::now();
    std::vector<double> T;
    for (double x = 4.0 * std::log(2048.0); x <= 200.0; x *= 1.25) T.push_back(x);
    const Vec2 y[] = {{0.013, 0.007}};
    const TailCurve tail = concentration_tail(archives, sol, y, T, 4.0);
    verdict(8, "concentration tail", tail.passed() && !tail.thresholds.empty(), run_secs + seconds_since(t), 900,
            fmt("%zu thresholds from T = %.1f, %zu violations, P(T_min) %.3g", tail.thresholds.size(), T.front(),
                tail.violations(), tail.empirical.front()));
  }
  if (ids.count(9)) {
    const auto t = Clock::now();
    // doubling grid below the asserted floor 1/beta + N R^2, finer above it
    const double floor = 1.0 / std::pow(2048.0, -0.9) + 1.0;
    std::vector<double> Q;
    for (double q = 1.0; q < floor; q *= 2.0) Q.push_back(q);
    for (double f : {1.0, 1.1, 1.25, 1.5, 2.0}) Q.push_back(std::ceil(f * floor));
    const TailCurve tail = overcrowding_stat(archives, {0.0, 0.0}, 1.0 / std::sqrt(2048.0), Q, 1.0);
    std::size_t asserted = 0;
    for (bool a : tail.asserted) asserted += a;
    verdict(9, "overcrowding", tail.passed() && asserted > 0, run_secs + seconds_since(t), 900,
            fmt("%zu of %zu thresholds asserted, %zu violations", asserted, tail.thresholds.size(),
                tail.violations()));
  }
}

// 10. estimators on synthetic Poisson fixtures
void null_calibration() {
  const auto t0 = Clock::now();
  const double lambda = 2.0 / M_PI;
  const Box unit = Box::square(1.0);
  std::vector<double> p_chi, p_r1, p_r2, p_win;
  double worst_tv = 0.0;
  auto normal_p = [](double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); };
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    Xoshiro256 rng = Xoshiro256::stream(777, {rep});
    const auto pp = synthetic_poisson(lambda, kDefaultWindow, 10000, rng, 8);
    const PoissonTest pt = poisson_count_test(pp, unit, lambda);
    worst_tv = std::max(worst_tv, pt.tv);
    p_chi.push_back(pt.p_value);
    const CorrelationEstimate r1 = estimate_correlation(pp, 1);
    const CorrelationEstimate r2 = estimate_correlation(pp, 2);
    // one z per repetition: a fixed bin, so the repetitions stay independent
    p_r1.push_back(normal_p((r1.values[5] - lambda) / r1.std_err[5]));
    p_r2.push_back(normal_p((r2.values[5] - lambda * lambda) / r2.std_err[5]));
    p_win.push_back(normal_p(window_count_correlation(pp, Box::square(1.0, {-1.0, 0.0}),
                                                      Box::square(1.0, {1.0, 0.0}))
                                 .z()));
  }
  const KsResult k_chi = ks_uniform(p_chi), k_r1 = ks_uniform(p_r1), k_r2 = ks_uniform(p_r2),
                 k_win = ks_uniform(p_win);
  const bool pass = worst_tv <= 0.02 && k_chi.p_value > 0.01 && k_r1.p_value > 0.01 && k_r2.p_value > 0.01 &&
                    k_win.p_value > 0.01;
  verdict(10, "null calibration", pass, seconds_since(t0), 120,
          fmt("worst TV %.4f; KS p: chi-square %.2f, R1 %.2f, R2 %.2f, window %.2f", worst_tv, k_chi.p_value,
              k_r1.p_value, k_r2.p_value, k_win.p_value));
}

// 11. byte-identical outputs for 1 and 8 threads
std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void determinism() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / "coulomb2d_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "config.json";
  std::ofstream(cfg) << R"({
  "potential": {"name": "quadratic"},
  "n": 128, "beta_rule": "N^-0.9",
  "grid": {"half_width": 3.5, "cells": 128},
  "sampler": {"seed": 2024, "frames": 250, "thinning": 512, "replicas": 8},
  "analysis": {"min_effective_frames": 50}
})";
  bool ok = true;
  std::string detail;
  for (const char* threads : {"1", "8"}) {
    const fs::path dir = root / (std::string("t") + threads);
    std::ostringstream out, err;
    for (const char* cmd : {"sample", "analyze", "report"}) {
      const int rc = cli::run({"--config", cfg.string(), "--out-dir", dir.string(), "--threads", threads,
                               "--log-level", "error", cmd},
                              out, err);
      if (rc != 0) {
        ok = false;
        detail += fmt("%s with %s threads exited %d: %s; ", cmd, threads, rc, err.str().c_str());
      }
    }
  }
  std::size_t compared = 0, differing = 0;
  if (ok) {
    const fs::path a = root / "t1", b = root / "t8";
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file()) continue;
      const fs::path rel = fs::relative(e.path(), a);
      // manifests carry wall-clock timestamps; everything else must match
      if (rel.string().ends_with(".manifest.json")) continue;
      ++compared;
      if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) {
        ++differing;
        detail += "differs: " + rel.string() + "; ";
      }
    }
  }
  const bool pass = ok && compared >= 10 && differing == 0;
  verdict(11, "determinism across threads", pass, seconds_since(t0), 60,
          fmt("%zu files compared, %zu differ%s%s", compared, differing, detail.empty() ? "" : "; ",
              detail.c_str()));
  fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> ids;
  for (int i = 1; i < argc; ++i) ids.insert(std::stoi(argv[i]));
  if (ids.empty())
    for (int i = 1; i <= 11; ++i) ids.insert(i);
  const std::vector<std::pair<int, void (*)()>> fixed = {
      {1, splitting}, {2, energy_oracle}, {3, thermal_residual}, {4, regularization}, {5, min_energy}};
  for (const auto& [id, f] : fixed)
    if (ids.count(id)) f();
  if (ids.count(6) || ids.count(7) || ids.count(8) || ids.count(9)) gas_run(ids);
  if (ids.count(10)) null_calibration();
  if (ids.count(11)) determinism();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
