#pragma once

// Single-site Metropolis sampling of the Gibbs measure
// exp(-beta H_N) / Z with adaptive Gaussian proposals, independent replicas
// and the localisation diagnostics (overcrowding, confinement).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "coulomb2d/configuration.hpp"
#include "coulomb2d/equilibrium.hpp"
#include "coulomb2d/intervals.hpp"
#include "coulomb2d/potential.hpp"
#include "coulomb2d/rng.hpp"

namespace coulomb2d {

struct GasConfig {
  std::size_t n = 256;
  double beta = 1.0;
  std::string beta_rule;  // formula tag the beta came from, if any
  PotentialSpec potential = potentials::quadratic();
  std::uint64_t seed = 1;
  std::uint64_t steps = 0;     // total proposals per replica, burn-in included
  std::uint64_t burn_in = 0;   // proposals; 0 means 200 N
  std::uint64_t thinning = 0;  // proposals per frame; 0 means 10 N
  double proposal_scale = 0.0; // 0 means 0.5 / sqrt(N)
  std::size_t replicas = 8;
  std::uint64_t audit_interval = 10000;

  double theta() const { return beta * static_cast<double>(n); }
  bool large_theta_proxy() const { return theta() >= 4.0; }
  /// beta sqrt(N) log N; the intermediate regime needs this small.
  double regime_parameter() const;
  std::uint64_t effective_burn_in() const { return burn_in ? burn_in : 200 * n; }
  std::uint64_t effective_thinning() const { return thinning ? thinning : 10 * n; }
  double effective_proposal_scale() const;
  std::uint64_t frame_count() const;
  /// Throws PreconditionError on inconsistent settings.
  void validate() const;

  nlohmann::json to_json() const;
  static GasConfig from_json(const nlohmann::json& j);
};

struct ChainState {
  ParticleConfiguration config;
  double energy = 0.0;  // cached H_N
  std::uint64_t accepts = 0;
  std::uint64_t proposals = 0;
  double proposal_scale = 0.0;
  Xoshiro256 rng;

  double acceptance() const {
    return proposals ? static_cast<double>(accepts) / static_cast<double>(proposals) : 0.0;
  }
};

/// H(x_i -> proposal) - H; +infinity if the proposal hits another particle.
double delta_energy(const ChainState& state, std::size_t i, Vec2 proposal, const PotentialSpec& V);

/// min(1, exp(-beta dH)).
double accept_probability(double beta, double dH);

/// One proposal: uniform particle, Gaussian move of the current scale,
/// Metropolis accept. Returns whether the move was accepted.
bool metropolis_step(ChainState& state, const PotentialSpec& V, double beta);

/// Draws N iid points from the piecewise-constant density (inverse CDF over
/// cells, uniform inside the chosen cell).
ParticleConfiguration sample_iid(const GridMeasure& mu, std::size_t n, Xoshiro256& rng);

struct ChainStats {
  double acceptance = 0.0;       // after burn-in
  double burn_in_acceptance = 0.0;
  double proposal_scale = 0.0;   // frozen value
  double max_audit_drift = 0.0;  // relative |cached - recomputed|
  std::size_t audits = 0;
};

/// One replica's output: thinned frames and per-frame energies.
struct SampleArchive {
  GasConfig config;
  std::size_t replica = 0;
  std::size_t n = 0;
  std::vector<Vec2> positions;  // frames * n, frame-major
  std::vector<double> energies; // H_N per frame
  ChainStats stats;

  std::size_t frames() const { return n ? positions.size() / n : 0; }
  std::span<const Vec2> frame(std::size_t f) const { return {positions.data() + f * n, n}; }
  nlohmann::json header() const;
};

/// Runs replica `replica` of cfg, initialised iid from mu_theta.
SampleArchive run_chain(const GasConfig& cfg, const ThermalSolution& mu_theta, std::size_t replica = 0);

/// Runs cfg.replicas chains on at most `threads` workers (further capped by
/// the COULOMB2D_THREADS environment variable). Output order is by replica.
std::vector<SampleArchive> run_replicas(const GasConfig& cfg, const ThermalSolution& mu_theta,
                                        std::size_t threads = 1);

/// Worker count after applying the COULOMB2D_THREADS cap.
std::size_t capped_threads(std::size_t requested);

inline constexpr std::uint64_t kArchiveFormatVersion = 1;

/// uint64 LE header length, JSON header, then frames of (x, y) LE doubles.
void write_archive(const std::filesystem::path& path, const SampleArchive& a);
SampleArchive read_archive(const std::filesystem::path& path);

/// Axis-aligned box or disk.
struct Region {
  enum class Kind { disk, box } kind = Kind::disk;
  Vec2 center;
  double size = 1.0;  // radius, or half-width of the box
  bool contains(Vec2 p) const;
  static Region disk(Vec2 c, double r) { return {Kind::disk, c, r}; }
  static Region box(Vec2 c, double half) { return {Kind::box, c, half}; }
};

/// P(#{x_i in B_R(x)} >= Q) per Q with Wilson intervals, against
/// exp(-beta Q^2 / 2), asserted for Q >= C (1/beta + N R^2).
TailCurve overcrowding_stat(std::span<const SampleArchive> archives, Vec2 x, double R,
                            const std::vector<double>& Q_grid, double C = 1.0,
                            std::optional<double> effective_frames = std::nullopt);

struct ConfinementStat {
  double escape_probability = 0.0;
  Interval ci;
  double reference = 0.0;  // N mu_theta(U^c)
  std::size_t frames = 0;
};

ConfinementStat confinement_stat(std::span<const SampleArchive> archives, const Region& U,
                                 const GridMeasure& mu_theta);

}  // namespace coulomb2d
