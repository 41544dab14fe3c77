#pragma once

// Batch driver behind the coulomb2d tool: JSON run configs, the five
// subcommands and their manifests. Everything is callable in-process.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coulomb2d/equilibrium.hpp"
#include "coulomb2d/errors.hpp"
#include "coulomb2d/sampler.hpp"

namespace coulomb2d::cli {

enum ExitCode : int {
  kOk = 0,
  kSolverFailure = 2,
  kSamplerFailure = 3,
  kStatisticsFailure = 4,
  kVerificationFailure = 5,
  kUsage = 64,
  kMissingData = 65,
};

/// Malformed or inconsistent run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// beta from a rule over N: "c*N^p" (p a decimal or a/b, braces allowed) or
/// "c/(sqrt(N)*log(N))"; c defaults to 1.
double evaluate_beta_rule(const std::string& rule, std::size_t n);

struct RunConfig {
  nlohmann::json json;  // as loaded, after command-line overrides
  PotentialSpec potential = potentials::quadratic();
  double theta = 0.0;
  GridGeometry grid;
  ThermalOptions thermal;
  std::optional<GasConfig> gas;  // present when n and beta (or beta_rule) are given
  nlohmann::json analysis = nlohmann::json::object();
  nlohmann::json verify = nlohmann::json::object();

  std::string hash() const;
};

RunConfig parse_config(nlohmann::json j);
RunConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed = std::nullopt);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Runs one command line (without the program name). Returns the exit code;
/// diagnostics go to err, results to out.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace coulomb2d::cli
