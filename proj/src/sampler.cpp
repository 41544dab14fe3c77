#include "coulomb2d/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <numbers>
#include <thread>

#include "coulomb2d/binary_io.hpp"
#include "coulomb2d/energy.hpp"
#include "coulomb2d/errors.hpp"

namespace coulomb2d {

double GasConfig::regime_parameter() const {
  const double N = static_cast<double>(n);
  return beta * std::sqrt(N) * std::log(N);
}

double GasConfig::effective_proposal_scale() const {
  return proposal_scale > 0.0 ? proposal_scale : 0.5 / std::sqrt(static_cast<double>(n));
}

std::uint64_t GasConfig::frame_count() const {
  const std::uint64_t burn = effective_burn_in();
  return steps > burn ? (steps - burn) / effective_thinning() : 0;
}

void GasConfig::validate() const {
  if (n < 1) throw PreconditionError("gas needs n >= 1");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw PreconditionError("beta must be positive and finite");
  if (steps < effective_burn_in()) throw PreconditionError("steps must cover the burn-in");
  if (replicas < 1) throw PreconditionError("need at least one replica");
  if (audit_interval < 1) throw PreconditionError("audit interval must be positive");
  if (!potential.evaluate) throw PreconditionError("gas config has no potential");
}

nlohmann::json GasConfig::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  j["beta"] = beta;
  j["beta_rule"] = beta_rule;
  j["theta"] = theta();
  j["regime_parameter"] = regime_parameter();
  j["large_theta_proxy"] = large_theta_proxy();
  j["potential"] = {{"name", potential.name}, {"params", potential.params}};
  j["seed"] = seed;
  j["steps"] = steps;
  j["burn_in"] = effective_burn_in();
  j["thinning"] = effective_thinning();
  j["proposal_scale"] = effective_proposal_scale();
  j["replicas"] = replicas;
  j["audit_interval"] = audit_interval;
  return j;
}

GasConfig GasConfig::from_json(const nlohmann::json& j) {
  GasConfig c;
  c.n = j.at("n").get<std::size_t>();
  c.beta = j.at("beta").get<double>();
  c.beta_rule = j.value("beta_rule", std::string());
  const auto& p = j.at("potential");
  c.potential = potentials::from_name(p.at("name").get<std::string>(),
                                      p.value("params", std::map<std::string, double>{}));
  c.seed = j.at("seed").get<std::uint64_t>();
  c.steps = j.at("steps").get<std::uint64_t>();
  c.burn_in = j.value("burn_in", std::uint64_t{0});
  c.thinning = j.value("thinning", std::uint64_t{0});
  c.proposal_scale = j.value("proposal_scale", 0.0);
  c.replicas = j.value("replicas", std::size_t{8});
  c.audit_interval = j.value("audit_interval", std::uint64_t{10000});
  return c;
}

namespace {

// Splits a positive normal double into mantissa in [1, 2) and its binary
// exponent, without a libm call.
inline double renormalise(double x, std::int64_t& exponent) {
  constexpr std::uint64_t mask = 0x7ffULL << 52;
  const auto bits = std::bit_cast<std::uint64_t>(x);
  exponent += static_cast<std::int64_t>((bits & mask) >> 52) - 1023;
  return std::bit_cast<double>((bits & ~mask) | (1023ULL << 52));
}

// log prod_j |a - x_j|^2 / |b - x_j|^2 over j in [lo, hi). Products are
// renormalised per block of 8 so they stay in range; one log at the end.
// Sets hit if b lands on some x_j.
double log_ratio_sum(const Vec2* X, std::size_t lo, std::size_t hi, Vec2 a, Vec2 b, bool& hit) {
  double num = 1.0, den = 1.0;
  std::int64_t e_num = 0, e_den = 0;
  double closest = std::numeric_limits<double>::infinity();
  std::size_t j = lo;
  for (; j + 8 <= hi; j += 8) {
    double da[8], db[8];
    for (std::size_t k = 0; k < 8; ++k) {
      const double ax = a.x - X[j + k].x, ay = a.y - X[j + k].y;
      const double bx = b.x - X[j + k].x, by = b.y - X[j + k].y;
      da[k] = ax * ax + ay * ay;
      db[k] = bx * bx + by * by;
    }
    for (std::size_t k = 0; k < 8; ++k) closest = closest < db[k] ? closest : db[k];
    const double pa = ((da[0] * da[1]) * (da[2] * da[3])) * ((da[4] * da[5]) * (da[6] * da[7]));
    const double pb = ((db[0] * db[1]) * (db[2] * db[3])) * ((db[4] * db[5]) * (db[6] * db[7]));
    num = renormalise(num * pa, e_num);
    den = renormalise(den * pb, e_den);
  }
  for (; j < hi; ++j) {
    const double ax = a.x - X[j].x, ay = a.y - X[j].y;
    const double bx = b.x - X[j].x, by = b.y - X[j].y;
    const double d = bx * bx + by * by;
    num *= ax * ax + ay * ay;
    den *= d;
    closest = closest < d ? closest : d;
  }
  hit = hit || closest == 0.0;
  if (hit) return 0.0;
  return std::log(num / den) + static_cast<double>(e_num - e_den) * std::numbers::ln2;
}

}  // namespace

double delta_energy(const ChainState& state, std::size_t i, Vec2 proposal, const PotentialSpec& V) {
  const auto& X = state.config.positions;
  const std::size_t n = X.size();
  const Vec2 old = X[i];
  // sum_j [g(x' - x_j) - g(x_i - x_j)] = 1/2 log prod_j |x_i - x_j|^2 / |x' - x_j|^2
  bool hit = false;
  const double pair = 0.5 * (log_ratio_sum(X.data(), 0, i, old, proposal, hit) +
                             log_ratio_sum(X.data(), i + 1, n, old, proposal, hit));
  if (hit) return std::numeric_limits<double>::infinity();
  return pair + static_cast<double>(n) * (V(proposal) - V(old));
}

double accept_probability(double beta, double dH) {
  if (beta == 0.0) return 1.0;
  if (dH <= 0.0) return 1.0;
  return std::exp(-beta * dH);
}

bool metropolis_step(ChainState& state, const PotentialSpec& V, double beta) {
  const std::size_t n = state.config.n();
  const std::size_t i = static_cast<std::size_t>(state.rng.index(n));
  const auto [zx, zy] = state.rng.normal_pair();
  const double u = state.rng.uniform();
  const Vec2 proposal = state.config[i] + state.proposal_scale * Vec2{zx, zy};
  ++state.proposals;
  const double dH = delta_energy(state, i, proposal, V);
  if (!std::isfinite(dH)) return false;  // collision: rejected
  if (u < accept_probability(beta, dH)) {
    state.config[i] = proposal;
    state.energy += dH;
    ++state.accepts;
    return true;
  }
  return false;
}

ParticleConfiguration sample_iid(const GridMeasure& mu, std::size_t n, Xoshiro256& rng) {
  const GridGeometry& g = mu.geometry();
  std::vector<double> cdf(g.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (mu.density(k) < 0.0) throw PreconditionError("sample_iid needs a nonnegative density");
    acc += mu.density(k);
    cdf[k] = acc;
  }
  if (!(acc > 0.0)) throw PreconditionError("sample_iid needs positive mass");
  ParticleConfiguration X;
  X.positions.reserve(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double u = rng.uniform() * acc;
    std::size_t k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    k = std::min(k, g.size() - 1);
    while (mu.density(k) == 0.0 && k > 0) --k;  // never land on an empty cell
    const Vec2 c = g.center(k);
    const double ox = rng.uniform() - 0.5, oy = rng.uniform() - 0.5;
    X.positions.push_back({c.x + ox * g.cell, c.y + oy * g.cell});
  }
  return X;
}

nlohmann::json SampleArchive::header() const {
  nlohmann::json j;
  j["format"] = "coulomb2d-archive";
  j["version"] = kArchiveFormatVersion;
  j["config"] = config.to_json();
  j["replica"] = replica;
  j["n"] = n;
  j["frames"] = frames();
  j["stats"] = {{"acceptance", stats.acceptance},
                {"burn_in_acceptance", stats.burn_in_acceptance},
                {"proposal_scale", stats.proposal_scale},
                {"max_audit_drift", stats.max_audit_drift},
                {"audits", stats.audits}};
  j["energies"] = energies;
  return j;
}

SampleArchive run_chain(const GasConfig& cfg, const ThermalSolution& mu_theta, std::size_t replica) {
  cfg.validate();
  if (std::fabs(mu_theta.theta - cfg.theta()) > 1e-9 * cfg.theta())
    throw PreconditionError("thermal solution was solved for a different theta");
  const PotentialSpec& V = cfg.potential;
  Xoshiro256 init = Xoshiro256::stream(cfg.seed, {replica, 0});
  ChainState s;
  s.config = sample_iid(mu_theta.mu_theta, cfg.n, init);
  s.energy = hamiltonian(s.config, V);
  s.rng = Xoshiro256::stream(cfg.seed, {replica, 1});
  s.proposal_scale = cfg.effective_proposal_scale();

  SampleArchive out;
  out.config = cfg;
  out.replica = replica;
  out.n = cfg.n;
  const std::uint64_t burn = cfg.effective_burn_in(), thin = cfg.effective_thinning();
  const std::uint64_t frames = cfg.frame_count();
  out.positions.reserve(frames * cfg.n);
  out.energies.reserve(frames);

  const std::uint64_t window = std::max<std::uint64_t>(cfg.n, 200);
  std::uint64_t window_accepts = 0, burn_accepts = 0;
  auto audit = [&]() {
    const double exact = hamiltonian(s.config, V);
    if (!std::isfinite(exact) || !std::isfinite(s.energy))
      throw SamplerError("non-finite energy in replica " + std::to_string(replica));
    const double drift = std::fabs(s.energy - exact) / std::max(std::fabs(exact), 1e-300);
    out.stats.max_audit_drift = std::max(out.stats.max_audit_drift, drift);
    ++out.stats.audits;
    s.energy = exact;
  };

  for (std::uint64_t t = 1; t <= burn + frames * thin; ++t) {
    const bool accepted = metropolis_step(s, V, cfg.beta);
    if (t <= burn) {
      window_accepts += accepted;
      burn_accepts += accepted;
      if (t % window == 0) {
        const double rate = static_cast<double>(window_accepts) / static_cast<double>(window);
        if (rate < 0.3) s.proposal_scale *= 0.85;
        else if (rate > 0.5) s.proposal_scale *= 1.15;
        window_accepts = 0;
      }
      if (t == burn) {
        out.stats.burn_in_acceptance = burn ? static_cast<double>(burn_accepts) / static_cast<double>(burn) : 0.0;
        s.accepts = 0;
        s.proposals = 0;
      }
    }
    if (t % cfg.audit_interval == 0) audit();
    if (t > burn && (t - burn) % thin == 0) {
      if (!std::isfinite(s.energy)) throw SamplerError("non-finite energy in replica " + std::to_string(replica));
      out.positions.insert(out.positions.end(), s.config.positions.begin(), s.config.positions.end());
      out.energies.push_back(s.energy);
    }
  }
  audit();
  out.stats.acceptance = s.acceptance();
  out.stats.proposal_scale = s.proposal_scale;
  return out;
}

std::size_t capped_threads(std::size_t requested) {
  std::size_t n = std::max<std::size_t>(requested, 1);
  if (const char* env = std::getenv("COULOMB2D_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap > 0) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return n;
}

std::vector<SampleArchive> run_replicas(const GasConfig& cfg, const ThermalSolution& mu_theta, std::size_t threads) {
  cfg.validate();
  const std::size_t workers = std::min(capped_threads(threads), cfg.replicas);
  std::vector<SampleArchive> out(cfg.replicas);
  std::vector<std::exception_ptr> errors(cfg.replicas);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t r = next++; r < cfg.replicas; r = next++) {
      try {
        out[r] = run_chain(cfg, mu_theta, r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

void write_archive(const std::filesystem::path& path, const SampleArchive& a) {
  const std::string header = a.header().dump();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  io::put_u64(os, header.size());
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const Vec2& p : a.positions) {
    io::put_f64(os, p.x);
    io::put_f64(os, p.y);
  }
  if (!os) throw FormatError("write failed for " + path.string());
}

SampleArchive read_archive(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw MissingFileError("missing archive " + path.string());
  std::ifstream is(path, std::ios::binary);
  const std::uint64_t len = io::get_u64(is);
  if (len > (1ULL << 32)) throw FormatError("corrupt archive header length in " + path.string());
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError("truncated archive header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed archive header: ") + e.what());
  }
  if (h.value("format", std::string()) != "coulomb2d-archive" || h.value("version", 0) != kArchiveFormatVersion)
    throw FormatError(path.string() + " is not a version-1 archive");
  SampleArchive a;
  try {
    a.config = GasConfig::from_json(h.at("config"));
    a.replica = h.at("replica").get<std::size_t>();
    a.n = h.at("n").get<std::size_t>();
    a.energies = h.at("energies").get<std::vector<double>>();
    const auto& st = h.at("stats");
    a.stats.acceptance = st.at("acceptance");
    a.stats.burn_in_acceptance = st.at("burn_in_acceptance");
    a.stats.proposal_scale = st.at("proposal_scale");
    a.stats.max_audit_drift = st.at("max_audit_drift");
    a.stats.audits = st.at("audits");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("archive header missing fields: ") + e.what());
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("archive header invalid: ") + e.what());
  }
  const std::size_t frames = h.at("frames").get<std::size_t>();
  a.positions.resize(frames * a.n);
  for (Vec2& p : a.positions) {
    p.x = io::get_f64(is);
    p.y = io::get_f64(is);
  }
  return a;
}

bool Region::contains(Vec2 p) const {
  if (kind == Kind::disk) return (p - center).norm2() <= size * size;
  return std::fabs(p.x - center.x) <= size && std::fabs(p.y - center.y) <= size;
}

TailCurve overcrowding_stat(std::span<const SampleArchive> archives, Vec2 x, double R,
                            const std::vector<double>& Q_grid, double C, std::optional<double> effective_frames) {
  if (archives.empty()) throw StatisticsError("overcrowding_stat needs archives");
  const std::size_t n = archives.front().n;
  const double beta = archives.front().config.beta;
  if (R < (1.0 - 1e-12) / std::sqrt(static_cast<double>(n)))
    throw PreconditionError("overcrowding radius must be at least N^{-1/2}");
  std::vector<std::size_t> counts;
  for (const auto& a : archives)
    for (std::size_t f = 0; f < a.frames(); ++f) {
      std::size_t c = 0;
      for (const Vec2& p : a.frame(f)) c += (p - x).norm2() <= R * R;
      counts.push_back(c);
    }
  if (counts.empty()) throw StatisticsError("overcrowding_stat needs frames");
  const double frames = static_cast<double>(counts.size());
  const double n_eff = effective_frames.value_or(frames);
  const double floor = C * (1.0 / beta + static_cast<double>(n) * R * R);
  TailCurve t;
  t.effective_samples = n_eff;
  for (double Q : Q_grid) {
    double hits = 0.0;
    for (std::size_t c : counts) hits += static_cast<double>(c) >= Q;
    const double p = hits / frames;
    const Interval ci = wilson_interval(p * n_eff, n_eff);
    t.thresholds.push_back(Q);
    t.empirical.push_back(p);
    t.ci_lo.push_back(ci.lo);
    t.ci_hi.push_back(ci.hi);
    t.bound.push_back(std::exp(-0.5 * beta * Q * Q));
    t.asserted.push_back(Q >= floor);
  }
  return t;
}

ConfinementStat confinement_stat(std::span<const SampleArchive> archives, const Region& U, const GridMeasure& mu) {
  ConfinementStat s;
  double escapes = 0.0;
  for (const auto& a : archives)
    for (std::size_t f = 0; f < a.frames(); ++f) {
      bool out = false;
      for (const Vec2& p : a.frame(f)) out = out || !U.contains(p);
      escapes += out;
      ++s.frames;
    }
  if (s.frames == 0) throw StatisticsError("confinement_stat needs frames");
  s.escape_probability = escapes / static_cast<double>(s.frames);
  s.ci = wilson_interval(escapes, static_cast<double>(s.frames));
  const double outside = mu.integrate([&](Vec2 p) { return U.contains(p) ? 0.0 : 1.0; });
  s.reference = static_cast<double>(archives.front().n) * outside;
  return s;
}

}  // namespace coulomb2d
