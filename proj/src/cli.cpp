#include "coulomb2d/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <regex>
#include <sstream>

#include <CLI11.hpp>
#include <openssl/evp.h>

#include "coulomb2d/grid_io.hpp"
#include "coulomb2d/statistics.hpp"
#include "coulomb2d/verify.hpp"

namespace coulomb2d::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "1.0.0";
constexpr const char* kThermalFile = "mu_theta.c2dg";

// -- small utilities ---------------------------------------------------------------

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

struct Log {
  std::ostream& err;
  Level level = Level::info;
  void operator()(Level l, const std::string& msg) const {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (l <= level) err << "[" << names[static_cast<int>(l)] << "] " << msg << "\n";
  }
};

Level parse_level(const std::string& s) {
  if (s == "error") return Level::error;
  if (s == "warn") return Level::warn;
  if (s == "info") return Level::info;
  if (s == "debug") return Level::debug;
  throw ConfigError("unknown log level '" + s + "'");
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os << text;
}

nlohmann::json read_json_file(const fs::path& path) {
  if (!fs::exists(path)) throw MissingFileError("missing file " + path.string());
  std::ifstream is(path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

Vec2 get_vec(const nlohmann::json& j, const char* key, Vec2 fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const auto v = get_or<std::vector<double>>(j, key, {});
  if (v.size() != 2) throw ConfigError(std::string("config key '") + key + "' must be a pair");
  return {v[0], v[1]};
}

// Run manifest written next to a command's outputs.
struct Manifest {
  explicit Manifest(std::string cmd, const RunConfig* cfg = nullptr) : command(std::move(cmd)), config(cfg) {}

  std::string command;
  const RunConfig* config = nullptr;
  std::string started = utc_now();
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  nlohmann::json checks = nlohmann::json::object();

  void write(const fs::path& dir) const {
    nlohmann::json j;
    j["tool"] = "coulomb2d";
    j["version"] = kToolVersion;
    j["command"] = command;
    if (config) {
      j["config_hash"] = config->hash();
      j["config"] = config->json;
      if (config->gas) j["seed"] = config->gas->seed;
    }
    j["started"] = started;
    j["finished"] = utc_now();
    auto files = [](const std::vector<fs::path>& v) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& p : v) a.push_back({{"path", p.filename().string()}, {"sha256", sha256_file(p)}});
      return a;
    };
    j["inputs"] = files(inputs);
    j["outputs"] = files(outputs);
    j["checks"] = checks;
    write_text(dir / (command + ".manifest.json"), j.dump(2) + "\n");
  }
};

// -- thermal solution on disk ------------------------------------------------------

ThermalSolution solve_and_store(const RunConfig& cfg, const fs::path& dir, Manifest& m, const Log& log) {
  log(Level::info, "solving thermal equilibrium at theta = " + std::to_string(cfg.theta));
  ThermalSolution sol = solve_thermal(cfg.potential, cfg.theta, cfg.grid, cfg.thermal);
  if (!(sol.residual <= cfg.thermal.tolerance))
    throw ConvergenceError("thermal residual above tolerance", sol.residual, sol.iterations);
  nlohmann::json prov;
  prov["kind"] = "thermal_equilibrium";
  prov["theta"] = cfg.theta;
  prov["c_theta"] = sol.c_theta;
  prov["residual"] = sol.residual;
  prov["iterations"] = sol.iterations;
  prov["boundary_mass"] = sol.boundary_mass;
  prov["potential"] = {{"name", cfg.potential.name}, {"params", cfg.potential.params}};
  prov["config_hash"] = cfg.hash();
  const fs::path path = dir / kThermalFile;
  write_grid_measure(path, sol.mu_theta, prov);
  m.outputs.push_back(path);
  m.outputs.push_back(sidecar_path(path));
  return sol;
}

ThermalSolution load_thermal(const fs::path& dir, const PotentialSpec& V, double theta, Manifest& m) {
  const fs::path path = dir / kThermalFile;
  const nlohmann::json side = read_grid_sidecar(path);
  const double stored = side.value("theta", -1.0);
  if (std::abs(stored - theta) > 1e-9 * theta)
    throw ConfigError("stored thermal solution has theta " + std::to_string(stored) + ", run needs " +
                      std::to_string(theta));
  m.inputs.push_back(path);
  m.inputs.push_back(sidecar_path(path));
  return thermal_from_measure(read_grid_measure(path), V, theta);
}

// -- commands ----------------------------------------------------------------------

int cmd_equilibrium(const RunConfig& cfg, const fs::path& dir, std::ostream& out, const Log& log) {
  Manifest m("equilibrium", &cfg);
  const ThermalSolution sol = solve_and_store(cfg, dir, m, log);
  out << "theta " << cfg.theta << " residual " << sol.residual << " iterations " << sol.iterations << "\n";
  m.checks["residual"] = sol.residual <= cfg.thermal.tolerance;
  m.write(dir);
  return kOk;
}

int cmd_sample(const RunConfig& cfg, const fs::path& dir, std::size_t threads, std::ostream& out, const Log& log) {
  if (!cfg.gas) throw ConfigError("sample needs n and beta (or beta_rule)");
  Manifest m("sample", &cfg);
  ThermalSolution sol;
  if (fs::exists(dir / kThermalFile))
    sol = load_thermal(dir, cfg.potential, cfg.theta, m);
  else
    sol = solve_and_store(cfg, dir, m, log);
  log(Level::info, "running " + std::to_string(cfg.gas->replicas) + " replicas on " +
                       std::to_string(capped_threads(threads)) + " worker(s)");
  const auto archives = run_replicas(*cfg.gas, sol, threads);
  for (const auto& a : archives) {
    std::ostringstream name;
    name << "replica_" << std::setw(3) << std::setfill('0') << a.replica << ".c2da";
    write_archive(dir / name.str(), a);
    m.outputs.push_back(dir / name.str());
    out << name.str() << " frames " << a.frames() << " acceptance " << a.stats.acceptance << " audit_drift "
        << a.stats.max_audit_drift << "\n";
    m.checks[name.str() + ".audit"] = a.stats.max_audit_drift <= 1e-8;
  }
  m.write(dir);
  return kOk;
}

std::vector<fs::path> find_archives(const fs::path& dir) {
  std::vector<fs::path> found;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".c2da") found.push_back(e.path());
  std::sort(found.begin(), found.end());
  return found;
}

// Runs one estimator, naming it in any statistics error.
template <class F>
void estimator(const char* name, nlohmann::json& checks, F&& f) {
  try {
    checks[name] = f();
  } catch (const StatisticsError& e) {
    throw StatisticsError(std::string(name) + ": " + e.what());
  }
}

int cmd_analyze(const RunConfig& cfg, const fs::path& dir, std::vector<fs::path> paths, std::ostream& out,
                const Log& log) {
  Manifest m("analyze", &cfg);
  if (paths.empty()) paths = find_archives(dir);
  if (paths.empty()) throw MissingFileError("no archives given or found in " + dir.string());
  std::vector<SampleArchive> archives;
  for (const auto& p : paths) {
    archives.push_back(read_archive(p));
    m.inputs.push_back(p);
  }
  const GasConfig& gas = archives.front().config;
  for (const auto& a : archives)
    if (a.n != gas.n || a.config.beta != gas.beta) throw ConfigError("archives come from different runs");
  const std::size_t N = gas.n;
  const double beta = gas.beta;
  const ThermalSolution sol = load_thermal(dir, gas.potential, gas.theta(), m);
  const nlohmann::json& A = cfg.analysis;

  const Vec2 origin = get_vec(A, "origin", {0.0, 0.0});
  const Box window = Box::square(get_or(A, "window", 8.0));
  const double mu_theta_origin = std::exp(sol.log_density.interpolate(origin));
  double lambda = mu_theta_origin;
  std::string lambda_source = "mu_theta";
  if (A.contains("lambda") && A["lambda"].is_number()) {
    lambda = A["lambda"].get<double>();
    lambda_source = "config";
  } else if (get_or<std::string>(A, "lambda", "mu_V") == "mu_V") {
    const EquilibriumSolution eq = solve_equilibrium(gas.potential, sol.mu_theta.geometry());
    const auto cell = eq.mu.geometry().locate(origin);
    if (!cell) throw ConfigError("analysis origin outside the grid");
    lambda = eq.mu.density(*cell);
    lambda_source = "mu_V";
  }
  log(Level::info, "intensity " + std::to_string(lambda) + " from " + lambda_source);

  const auto pp = local_processes(archives, origin, window);
  nlohmann::json report;
  report["n"] = N;
  report["beta"] = beta;
  report["theta"] = gas.theta();
  report["frames"] = pp.size();
  report["lambda"] = {{"value", lambda}, {"source", lambda_source}, {"mu_theta_origin", mu_theta_origin}};
  nlohmann::json checks = nlohmann::json::object();
  nlohmann::json& results = report["results"];

  const double poisson_side = get_or(A, "poisson_window", 1.0);
  estimator("poisson", checks, [&] {
    const PoissonTest t = poisson_count_test(pp, Box::square(poisson_side), lambda, get_or(A, "min_effective_frames", 200.0));
    results["poisson"] = t.to_json();
    return t.tv <= get_or(A, "tv_max", 0.05) && t.p_value >= 0.01;
  });
  estimator("window_correlation", checks, [&] {
    const WindowCorrelation w = window_count_correlation(pp, Box::square(poisson_side, {-poisson_side, 0.0}),
                                                         Box::square(poisson_side, {poisson_side, 0.0}));
    results["window_correlation"] = {{"r", w.r}, {"sigma", w.sigma}, {"z", w.z()}};
    return w.within(3.0);
  });
  const nlohmann::json corr = A.value("correlation", nlohmann::json::object());
  const CorrelationBins bins{get_or<std::size_t>(corr, "per_side", 4), get_or(corr, "reach", 1.0)};
  const std::size_t min_frames = get_or<std::size_t>(corr, "min_frames", 100);
  estimator("correlation_k1", checks, [&] {
    const CorrelationEstimate r1 = estimate_correlation(pp, 1, bins, min_frames);
    results["correlation_k1"] = r1.to_json();
    double se2 = 0.0;
    for (double s : r1.std_err) se2 += s * s;
    const double se_mean = std::sqrt(se2) / static_cast<double>(r1.values.size());
    const double dev = std::abs(r1.mean() / mu_theta_origin - 1.0);
    const double tol = std::max(3.0 * se_mean / mu_theta_origin,
                                beta * std::sqrt(static_cast<double>(N)) * std::log(static_cast<double>(N)));
    results["correlation_k1"]["ratio_deviation"] = dev;
    results["correlation_k1"]["tolerance"] = tol;
    return dev <= tol;
  });
  estimator("correlation_k2", checks, [&] {
    const CorrelationEstimate r2 = estimate_correlation(pp, 2, bins, min_frames);
    results["correlation_k2"] = r2.to_json();
    results["correlation_k2"]["normalized_mean"] = r2.mean() / (mu_theta_origin * mu_theta_origin);
    return true;  // reported, no assertion
  });
  const nlohmann::json op = A.value("one_point", nlohmann::json::object());
  estimator("one_point", checks, [&] {
    const GridGeometry bulk = GridGeometry::centered(get_or(op, "half_width", 0.5), get_or<std::size_t>(op, "cells", 8));
    const OnePointRatio r = one_point_ratio(archives, sol, bulk, get_or(op, "C", 1.0), get_or(op, "gamma", 0.1));
    results["one_point"] = r.to_json();
    return r.holds();
  });
  const nlohmann::json cc = A.value("concentration", nlohmann::json::object());
  estimator("concentration", checks, [&] {
    std::vector<Vec2> ys;
    for (const auto& p : get_or<std::vector<std::vector<double>>>(cc, "points", {{0.013, 0.007}}))
      if (p.size() == 2) ys.push_back({p[0], p[1]});
    const double C = get_or(cc, "C", 4.0);
    std::vector<double> T;
    for (double t = C * std::log(static_cast<double>(N)); t <= get_or(cc, "T_max", 200.0); t *= 1.25) T.push_back(t);
    const TailCurve t = concentration_tail(archives, sol, ys, T, C);
    results["concentration"] = t.to_json();
    return t.passed();
  });
  const nlohmann::json oc = A.value("overcrowding", nlohmann::json::object());
  estimator("overcrowding", checks, [&] {
    const double R = get_or(oc, "radius_factor", 1.0) / std::sqrt(static_cast<double>(N));
    const double C = get_or(oc, "C", 1.0);
    const double floor = C * (1.0 / beta + static_cast<double>(N) * R * R);
    std::vector<double> Q;
    for (double q = 1.0; q <= 2.0 * floor + 8.0; q = std::ceil(q * 1.3)) Q.push_back(q);
    const TailCurve t = overcrowding_stat(archives, get_vec(oc, "center", origin), R, Q, C);
    results["overcrowding"] = t.to_json();
    return t.passed();
  });
  estimator("confinement", checks, [&] {
    const double radius = get_or(A.value("confinement", nlohmann::json::object()), "radius", 2.0);
    const ConfinementStat c = confinement_stat(archives, Region::disk(origin, radius), sol.mu_theta);
    results["confinement"] = {{"radius", radius},       {"escape_probability", c.escape_probability},
                              {"ci_lo", c.ci.lo},       {"ci_hi", c.ci.hi},
                              {"reference", c.reference}, {"frames", c.frames}};
    return true;  // reported, no assertion
  });
  const nlohmann::json lp = A.value("laplace", nlohmann::json::object());
  estimator("laplace", checks, [&] {
    const double a = get_or(lp, "amplitude", 0.5), r = get_or(lp, "radius", 2.0);
    const LaplaceResult l = laplace_functional(
        pp, [&](Vec2 p) { return a * std::max(0.0, 1.0 - p.norm2() / (r * r)); }, lambda);
    results["laplace"] = {{"value", l.value}, {"std_err", l.std_err}, {"reference", l.reference}};
    return l.consistent(3.0);
  });
  estimator("linear_statistic", checks, [&] {
    const TestFunction phi{[](Vec2 p) { return p.x; }, [](Vec2) { return Vec2{1.0, 0.0}; }};
    const LinearStatisticReport r = linear_statistic(archives, sol, phi, get_or(A.value("linear", nlohmann::json::object()), "C", 1.0));
    results["linear_statistic"] = r.to_json();
    return r.holds();
  });
  const nlohmann::json tw = A.value("thermal_weight", nlohmann::json::object());
  estimator("thermal_weight", checks, [&] {
    bool ok = true;
    nlohmann::json rows = nlohmann::json::array();
    for (double k : get_or<std::vector<double>>(tw, "k", {1.0, 2.0, 3.0})) {
      const MomentEstimate e = thermal_weight_moment(archives, sol, k, get_or(tw, "C", 5.0));
      auto row = e.to_json();
      row["k"] = k;
      rows.push_back(row);
      ok = ok && e.holds();
    }
    results["thermal_weight"] = rows;
    return ok;
  });
  const nlohmann::json sm = A.value("smoothing", nlohmann::json::object());
  estimator("smoothing", checks, [&] {
    const double t = get_or(sm, "t", 1.0);
    const kernel::SmearingRadius eta(get_or(sm, "eta_factor", 1.0) / static_cast<double>(N));
    const MomentEstimate e = smoothing_moment_check(archives, sol, get_vec(sm, "point", {0.013, 0.007}), t, eta,
                                                    get_or(sm, "C", 10.0));
    results["smoothing"] = e.to_json();
    return e.holds();
  });

  report["checks"] = checks;
  const fs::path json_path = dir / "analysis.json";
  write_text(json_path, report.dump(2) + "\n");
  std::ostringstream csv;
  csv << "check,pass\n";
  for (auto it = checks.begin(); it != checks.end(); ++it) {
    csv << it.key() << "," << (it.value().get<bool>() ? 1 : 0) << "\n";
    out << std::left << std::setw(20) << it.key() << (it.value().get<bool>() ? "PASS" : "FAIL") << "\n";
  }
  write_text(dir / "analysis_summary.csv", csv.str());
  m.outputs = {json_path, dir / "analysis_summary.csv"};
  m.checks = checks;
  m.write(dir);
  return kOk;
}

int cmd_verify(const RunConfig& cfg, const fs::path& dir, bool refine, std::ostream& out, const Log& log) {
  Manifest m("verify", &cfg);
  const nlohmann::json& C = cfg.verify;
  nlohmann::json report, checks = nlohmann::json::object();

  const nlohmann::json oc = C.value("oracle", nlohmann::json::object());
  {
    log(Level::info, "Fourier vs real-space energies");
    double worst = 0.0;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& nu : verify::dipole_family(verify::family_grid(), get_or<std::size_t>(oc, "count", 10))) {
      const verify::OracleRow r = verify::energy_oracle(nu);
      rows.push_back({{"fourier", r.fourier}, {"real_space", r.real_space}, {"relative", r.relative}});
      worst = std::max(worst, r.relative);
    }
    report["oracle"] = {{"rows", rows}, {"worst_relative", worst}};
    checks["oracle"] = worst <= get_or(oc, "tolerance", 1e-4);
  }
  const nlohmann::json me = C.value("min_energy", nlohmann::json::object());
  {
    log(Level::info, "min-energy family");
    const verify::MinEnergyStudy s = verify::min_energy_study(get_or(me, "eta", 0.05), get_or<std::size_t>(me, "count", 20));
    report["min_energy"] = s.to_json();
    checks["min_energy"] = s.floor > get_or(me, "floor_min", 0.001);
  }
  const nlohmann::json sp = C.value("splitting", nlohmann::json::object());
  {
    log(Level::info, "splitting identity");
    verify::SplittingOptions o;
    o.n = get_or<std::size_t>(sp, "n", o.n);
    o.theta = get_or(sp, "theta", std::pow(static_cast<double>(o.n), 0.25));
    o.configurations = get_or<std::size_t>(sp, "configurations", o.configurations);
    o.fine_cells = get_or<std::size_t>(sp, "fine_cells", o.fine_cells);
    o.half_width = get_or(sp, "half_width", o.half_width);
    o.seed = get_or<std::uint64_t>(sp, "seed", o.seed);
    const verify::SplittingStudy s = verify::splitting_study(cfg.potential, o);
    report["splitting"] = s.to_json();
    checks["splitting"] = s.max_relative <= get_or(sp, "tolerance", 5e-3);
    if (refine) {
      report["splitting"]["observed_order"] = std::log2(s.min_ratio);
      checks["splitting_refinement"] = s.min_ratio >= get_or(sp, "min_ratio", 3.0);
    }
  }
  const nlohmann::json rg = C.value("regularization", nlohmann::json::object());
  {
    log(Level::info, "regularization gap");
    verify::RegularizationOptions o;
    o.n = get_or<std::size_t>(rg, "n", o.n);
    o.theta = get_or(rg, "theta", o.theta);
    o.eta_factor = get_or(rg, "eta_factor", o.eta_factor);
    o.configurations = get_or<std::size_t>(rg, "configurations", o.configurations);
    o.cells = get_or<std::size_t>(rg, "cells", o.cells);
    o.half_width = get_or(rg, "half_width", o.half_width);
    o.C = get_or(rg, "C", o.C);
    o.seed = get_or<std::uint64_t>(rg, "seed", o.seed);
    const verify::RegularizationStudy s = verify::regularization_study(cfg.potential, o);
    report["regularization"] = s.to_json();
    checks["regularization"] = s.violations == 0;
  }
  report["checks"] = checks;
  const fs::path path = dir / "verify.json";
  write_text(path, report.dump(2) + "\n");
  bool all = true;
  for (auto it = checks.begin(); it != checks.end(); ++it) {
    all = all && it.value().get<bool>();
    out << std::left << std::setw(22) << it.key() << (it.value().get<bool>() ? "PASS" : "FAIL") << "\n";
  }
  m.outputs = {path};
  m.checks = checks;
  m.write(dir);
  return all ? kOk : kVerificationFailure;
}

void tail_csv(const nlohmann::json& t, const fs::path& path) {
  std::ostringstream os;
  os << "threshold,empirical,ci_lo,ci_hi,bound,asserted\n";
  for (std::size_t i = 0; i < t["thresholds"].size(); ++i)
    os << t["thresholds"][i].get<double>() << "," << t["empirical"][i].get<double>() << ","
       << t["ci_lo"][i].get<double>() << "," << t["ci_hi"][i].get<double>() << "," << t["bound"][i].get<double>()
       << "," << t["asserted"][i].get<int>() << "\n";
  write_text(path, os.str());
}

void bins_csv(const nlohmann::json& rows, const char* value_key, const fs::path& path) {
  std::ostringstream os;
  os << "x,y," << value_key << ",std_err\n";
  for (const auto& r : rows)
    os << r["x"].get<double>() << "," << r["y"].get<double>() << "," << r[value_key].get<double>() << ","
       << r["std_err"].get<double>() << "\n";
  write_text(path, os.str());
}

int cmd_report(const fs::path& dir, std::ostream& out) {
  Manifest m("report");
  const fs::path rdir = dir / "report";
  fs::create_directories(rdir);
  std::vector<fs::path> written;
  const fs::path analysis = dir / "analysis.json";
  const fs::path verification = dir / "verify.json";
  if (!fs::exists(analysis) && !fs::exists(verification))
    throw MissingFileError("report needs analysis.json or verify.json in " + dir.string());
  std::ostringstream summary;
  summary << "source,check,pass\n";
  if (fs::exists(analysis)) {
    const nlohmann::json a = read_json_file(analysis);
    m.inputs.push_back(analysis);
    const auto& r = a["results"];
    if (r.contains("concentration")) tail_csv(r["concentration"], rdir / "concentration_tail.csv"), written.push_back(rdir / "concentration_tail.csv");
    if (r.contains("overcrowding")) tail_csv(r["overcrowding"], rdir / "overcrowding_tail.csv"), written.push_back(rdir / "overcrowding_tail.csv");
    if (r.contains("correlation_k1")) bins_csv(r["correlation_k1"]["bins"], "value", rdir / "correlation_k1.csv"), written.push_back(rdir / "correlation_k1.csv");
    if (r.contains("correlation_k2")) bins_csv(r["correlation_k2"]["bins"], "value", rdir / "correlation_k2.csv"), written.push_back(rdir / "correlation_k2.csv");
    if (r.contains("one_point")) bins_csv(r["one_point"]["cells"], "ratio", rdir / "one_point_ratio.csv"), written.push_back(rdir / "one_point_ratio.csv");
    if (r.contains("poisson")) {
      const auto& p = r["poisson"];
      const double F = p["frames"].get<double>(), mean = p["expected"].get<double>();
      std::ostringstream os;
      os << "count,observed,expected\n";
      double pmf = std::exp(-mean);
      const auto& h = p["histogram"];
      for (std::size_t c = 0; c < h.size(); ++c) {
        os << c << "," << h[c].get<double>() / F << "," << pmf << "\n";
        pmf *= mean / static_cast<double>(c + 1);
      }
      write_text(rdir / "poisson_counts.csv", os.str());
      written.push_back(rdir / "poisson_counts.csv");
    }
    for (auto it = a["checks"].begin(); it != a["checks"].end(); ++it)
      summary << "analysis," << it.key() << "," << (it.value().get<bool>() ? 1 : 0) << "\n";
  }
  if (fs::exists(verification)) {
    const nlohmann::json v = read_json_file(verification);
    m.inputs.push_back(verification);
    if (v.contains("splitting")) {
      std::ostringstream os;
      os << "configuration,coarse,fine\n";
      for (std::size_t i = 0; i < v["splitting"]["fine"].size(); ++i)
        os << i << "," << v["splitting"]["coarse"][i].get<double>() << "," << v["splitting"]["fine"][i].get<double>() << "\n";
      write_text(rdir / "splitting_residuals.csv", os.str());
      written.push_back(rdir / "splitting_residuals.csv");
    }
    for (auto it = v["checks"].begin(); it != v["checks"].end(); ++it)
      summary << "verify," << it.key() << "," << (it.value().get<bool>() ? 1 : 0) << "\n";
  }
  write_text(rdir / "summary.csv", summary.str());
  written.push_back(rdir / "summary.csv");
  for (const auto& p : written) out << p.string() << "\n";
  m.outputs = written;
  m.write(dir);
  return kOk;
}

}  // namespace

// -- configuration -------------------------------------------------------------------

double evaluate_beta_rule(const std::string& raw, std::size_t n) {
  std::string r;
  for (char c : raw)
    if (!std::isspace(static_cast<unsigned char>(c))) r += c;
  // normalise the unicode spellings to ASCII
  auto replace_all = [&](const std::string& from, const std::string& to) {
    for (std::size_t at = r.find(from); at != std::string::npos; at = r.find(from, at + to.size())) r.replace(at, from.size(), to);
  };
  replace_all("·", "*");
  replace_all("√N", "sqrt(N)");
  replace_all("−", "-");
  replace_all("logN", "log(N)");
  replace_all("sqrtN", "sqrt(N)");
  const double N = static_cast<double>(n);
  if (n < 2) throw ConfigError("beta_rule needs N >= 2");
  static const std::regex power(R"(^(?:([0-9.eE+-]+)\*?)?N\^[\{\(]?(-?[0-9.]+)(?:/([0-9.]+))?[\}\)]?$)");
  static const std::regex critical(R"(^([0-9.eE+-]+)?/\(sqrt\(N\)\*?log\(N\)\)$)");
  std::smatch m;
  try {
    if (std::regex_match(r, m, power)) {
      const double c = m[1].matched ? std::stod(m[1].str()) : 1.0;
      double p = std::stod(m[2].str());
      if (m[3].matched) p /= std::stod(m[3].str());
      return c * std::pow(N, p);
    }
    if (std::regex_match(r, m, critical)) {
      const double c = m[1].matched ? std::stod(m[1].str()) : 1.0;
      return c / (std::sqrt(N) * std::log(N));
    }
  } catch (const std::logic_error&) {
    // fall through to the error below
  }
  throw ConfigError("beta_rule '" + raw + "' is not of the form c*N^p or c/(sqrt(N)*log(N))");
}

std::string RunConfig::hash() const { return sha256_hex(json.dump()); }

RunConfig parse_config(nlohmann::json j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  c.json = j;
  try {
    const nlohmann::json pot = j.value("potential", nlohmann::json{{"name", "quadratic"}});
    c.potential = potentials::from_name(pot.value("name", std::string("quadratic")),
                                        pot.value("params", std::map<std::string, double>{}));
  } catch (const PreconditionError& e) {
    throw ConfigError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("potential: ") + e.what());
  }
  const nlohmann::json grid = j.value("grid", nlohmann::json::object());
  const double half = get_or(grid, "half_width", 3.5);
  const std::size_t cells = get_or<std::size_t>(grid, "cells", 256);
  if (!(half > 0.0) || cells < 8) throw ConfigError("grid needs half_width > 0 and at least 8 cells");
  c.grid = GridGeometry::centered(half, cells);

  const nlohmann::json th = j.value("thermal", nlohmann::json::object());
  c.thermal.tolerance = get_or(th, "tolerance", c.thermal.tolerance);
  c.thermal.damping = get_or(th, "damping", c.thermal.damping);
  c.thermal.max_iterations = get_or(th, "max_iterations", c.thermal.max_iterations);
  const std::string method = get_or<std::string>(th, "method", "newton");
  if (method == "newton") c.thermal.method = ThermalMethod::newton;
  else if (method == "fixed_point") c.thermal.method = ThermalMethod::fixed_point;
  else throw ConfigError("thermal.method must be newton or fixed_point");

  const bool has_n = j.contains("n");
  if (has_n) {
    GasConfig g;
    g.n = get_or<std::size_t>(j, "n", 0);
    if (g.n < 1) throw ConfigError("n must be positive");
    if (j.contains("beta") && j.contains("beta_rule")) throw ConfigError("give beta or beta_rule, not both");
    if (j.contains("beta_rule")) {
      g.beta_rule = get_or<std::string>(j, "beta_rule", "");
      g.beta = evaluate_beta_rule(g.beta_rule, g.n);
    } else if (j.contains("beta")) {
      g.beta = get_or(j, "beta", 0.0);
    } else {
      throw ConfigError("config with n needs beta or beta_rule");
    }
    if (!(g.beta > 0.0)) throw ConfigError("beta must be positive");
    g.potential = c.potential;
    const nlohmann::json s = j.value("sampler", nlohmann::json::object());
    g.seed = get_or<std::uint64_t>(s, "seed", g.seed);
    g.burn_in = get_or<std::uint64_t>(s, "burn_in", 0);
    g.thinning = get_or<std::uint64_t>(s, "thinning", 0);
    g.proposal_scale = get_or(s, "proposal_scale", 0.0);
    g.replicas = get_or<std::size_t>(s, "replicas", g.replicas);
    g.audit_interval = get_or<std::uint64_t>(s, "audit_interval", g.audit_interval);
    if (s.contains("steps"))
      g.steps = get_or<std::uint64_t>(s, "steps", 0);
    else
      g.steps = g.effective_burn_in() + get_or<std::uint64_t>(s, "frames", 100) * g.effective_thinning();
    try {
      g.validate();
    } catch (const PreconditionError& e) {
      throw ConfigError(std::string("sampler: ") + e.what());
    }
    c.theta = g.theta();
    c.gas = g;
  }
  if (j.contains("theta")) {
    const double t = get_or(j, "theta", 0.0);
    if (c.gas && std::abs(t - c.theta) > 1e-9 * t) throw ConfigError("theta disagrees with beta * n");
    c.theta = t;
  }
  if (!(c.theta > 0.0)) throw ConfigError("config needs theta, or n with beta / beta_rule");
  c.analysis = j.value("analysis", nlohmann::json::object());
  c.verify = j.value("verify", nlohmann::json::object());
  return c;
}

RunConfig load_config(const fs::path& path, std::optional<std::uint64_t> seed) {
  if (!fs::exists(path)) throw ConfigError("config file " + path.string() + " does not exist");
  std::ifstream is(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  if (seed) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    j["sampler"]["seed"] = *seed;
  }
  return parse_config(std::move(j));
}

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingFileError("cannot hash missing file " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return sha256_hex(buf.str());
}

// -- entry point -----------------------------------------------------------------------

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"coulomb2d: two-dimensional Coulomb gas solver, sampler and diagnostics"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir = ".", level = "info";
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  app.add_option("--config", config_path, "run configuration (JSON)");
  app.add_option("--out-dir", out_dir, "directory for outputs");
  app.add_option("--seed", seed, "override sampler.seed");
  app.add_option("--threads", threads, "worker threads (capped by COULOMB2D_THREADS)")->check(CLI::PositiveNumber);
  app.add_option("--log-level", level, "error | warn | info | debug");
  auto* eq = app.add_subcommand("equilibrium", "solve the thermal equilibrium measure");
  auto* sa = app.add_subcommand("sample", "run Metropolis replicas");
  auto* an = app.add_subcommand("analyze", "run the statistical estimators on archives");
  std::vector<std::string> archive_args;
  an->add_option("archives", archive_args, "archive files (default: *.c2da in --out-dir)");
  auto* ve = app.add_subcommand("verify", "deterministic identity checks");
  bool refine = false;
  ve->add_flag("--refine", refine, "report the grid-refinement order of the splitting residual");
  auto* re = app.add_subcommand("report", "bundle CSV curves from analysis and verify outputs");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    const Log log{err, parse_level(level)};
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    if (re->parsed()) return cmd_report(dir, out);
    if (config_path.empty()) throw ConfigError("--config is required");
    const RunConfig cfg = load_config(config_path, seed);
    if (eq->parsed()) return cmd_equilibrium(cfg, dir, out, log);
    if (sa->parsed()) return cmd_sample(cfg, dir, threads, out, log);
    if (an->parsed()) {
      std::vector<fs::path> paths(archive_args.begin(), archive_args.end());
      return cmd_analyze(cfg, dir, paths, out, log);
    }
    if (ve->parsed()) return cmd_verify(cfg, dir, refine, out, log);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const MissingFileError& e) {
    err << "missing data: " << e.what() << "\n";
    return kMissingData;
  } catch (const FormatError& e) {
    err << "bad data file: " << e.what() << "\n";
    return kMissingData;
  } catch (const ConvergenceError& e) {
    err << "solver failure: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const SamplerError& e) {
    err << "sampler failure: " << e.what() << "\n";
    return kSamplerFailure;
  } catch (const StatisticsError& e) {
    err << "statistics failure: " << e.what() << "\n";
    return kStatisticsFailure;
  } catch (const PreconditionError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return kUsage;
}

}  // namespace coulomb2d::cli
