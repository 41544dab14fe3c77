#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "coulomb2d/cli.hpp"
#include "coulomb2d/grid_io.hpp"

using namespace coulomb2d;
namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / ("coulomb2d_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
    return dir / name;
  }
};

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kGas = R"({
  "potential": {"name": "quadratic"},
  "n": 48, "beta_rule": "N^-0.9",
  "grid": {"half_width": 3.5, "cells": 96},
  "sampler": {"seed": 9, "frames": 120, "thinning": 96, "replicas": 3},
  "analysis": {"min_effective_frames": 20, "correlation": {"min_frames": 50}}
})";

}  // namespace

TEST_CASE("beta rules") {
  CHECK(cli::evaluate_beta_rule("N^-0.9", 2048) == doctest::Approx(std::pow(2048.0, -0.9)).epsilon(1e-15));
  CHECK(cli::evaluate_beta_rule("N^{-3/4}", 1024) == doctest::Approx(std::pow(1024.0, -0.75)).epsilon(1e-15));
  CHECK(cli::evaluate_beta_rule("2*N^(-1/2)", 256) == doctest::Approx(2.0 / 16.0).epsilon(1e-15));
  CHECK(cli::evaluate_beta_rule("0.5/(sqrt(N)*log(N))", 256) ==
        doctest::Approx(0.5 / (16.0 * std::log(256.0))).epsilon(1e-15));
  CHECK(cli::evaluate_beta_rule("1/(√N·log N)", 256) == doctest::Approx(1.0 / (16.0 * std::log(256.0))).epsilon(1e-15));
  CHECK(cli::evaluate_beta_rule("N^−1", 64) == doctest::Approx(1.0 / 64.0).epsilon(1e-15));
  CHECK_THROWS_AS(cli::evaluate_beta_rule("N^", 64), cli::ConfigError);
  CHECK_THROWS_AS(cli::evaluate_beta_rule("exp(N)", 64), cli::ConfigError);
  CHECK_THROWS_AS(cli::evaluate_beta_rule("N^-1", 1), cli::ConfigError);
}

TEST_CASE("config parsing") {
  const cli::RunConfig c = cli::parse_config(nlohmann::json::parse(kGas));
  REQUIRE(c.gas);
  CHECK(c.gas->n == 48);
  CHECK(c.theta == doctest::Approx(48.0 * std::pow(48.0, -0.9)));
  CHECK(c.gas->frame_count() == 120);
  CHECK(c.grid.nx == 96);
  CHECK(c.hash() == cli::parse_config(nlohmann::json::parse(kGas)).hash());

  auto bad = [](const char* text) { return cli::parse_config(nlohmann::json::parse(text)); };
  CHECK_THROWS_AS(bad(R"({"n": 10})"), cli::ConfigError);
  CHECK_THROWS_AS(bad(R"({"n": 10, "beta": 1, "beta_rule": "N^-1"})"), cli::ConfigError);
  CHECK_THROWS_AS(bad(R"({"theta": 2, "potential": {"name": "nope"}})"), cli::ConfigError);
  CHECK_THROWS_AS(bad(R"({"theta": 2, "grid": {"cells": "many"}})"), cli::ConfigError);
  CHECK_THROWS_AS(bad(R"({"n": 10, "beta": 0.1, "theta": 5})"), cli::ConfigError);
  CHECK_THROWS_AS(bad(R"([1, 2])"), cli::ConfigError);
  CHECK_NOTHROW(bad(R"({"theta": 2})"));
}

TEST_CASE("SHA-256") {
  CHECK(cli::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(cli::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("exit codes") {
  Scratch s("codes");
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"frobnicate"}).code == cli::kUsage);
  CHECK(run({"--help"}).code == cli::kOk);
  CHECK(run({"--out-dir", s.dir.string(), "sample"}).code == cli::kUsage);  // no config
  const fs::path broken = s.write("broken.json", "{ not json");
  const Run r = run({"--config", broken.string(), "--out-dir", s.dir.string(), "equilibrium"});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("config") != std::string::npos);
  CHECK(run({"--config", (s.dir / "absent.json").string(), "equilibrium"}).code == cli::kUsage);
  const fs::path theta_only = s.write("theta.json", R"({"theta": 4, "grid": {"cells": 64}})");
  CHECK(run({"--config", theta_only.string(), "--out-dir", s.dir.string(), "sample"}).code == cli::kUsage);
  CHECK(run({"--out-dir", (s.dir / "empty").string(), "report"}).code == cli::kMissingData);
  // solver cannot reach the tolerance in one iteration
  const fs::path starved = s.write(
      "starved.json", R"({"theta": 50, "grid": {"cells": 64}, "thermal": {"max_iterations": 1, "tolerance": 1e-14}})");
  CHECK(run({"--config", starved.string(), "--out-dir", s.dir.string(), "equilibrium"}).code == cli::kSolverFailure);
}

TEST_CASE("equilibrium command") {
  Scratch s("equilibrium");
  const fs::path cfg = s.write("c.json", R"({"theta": 100, "grid": {"half_width": 1.5, "cells": 512}})");
  const Run a = run({"--config", cfg.string(), "--out-dir", (s.dir / "a").string(), "equilibrium"});
  REQUIRE(a.code == cli::kOk);
  const nlohmann::json side = read_grid_sidecar(s.dir / "a" / "mu_theta.c2dg");
  CHECK(side["residual"].get<double>() <= 1e-6);
  CHECK(side["theta"].get<double>() == 100.0);
  CHECK(fs::exists(s.dir / "a" / "equilibrium.manifest.json"));
  const Run b = run({"--config", cfg.string(), "--out-dir", (s.dir / "b").string(), "equilibrium"});
  REQUIRE(b.code == cli::kOk);
  CHECK(cli::sha256_file(s.dir / "a" / "mu_theta.c2dg") == cli::sha256_file(s.dir / "b" / "mu_theta.c2dg"));
}

TEST_CASE("sample, analyze, report pipeline") {
  Scratch s("pipeline");
  const fs::path cfg = s.write("gas.json", kGas);
  const std::string out = (s.dir / "run").string();
  REQUIRE(run({"--config", cfg.string(), "--out-dir", out, "sample"}).code == cli::kOk);
  for (int r = 0; r < 3; ++r) CHECK(fs::exists(fs::path(out) / ("replica_00" + std::to_string(r) + ".c2da")));

  const nlohmann::json manifest = nlohmann::json::parse(std::ifstream(fs::path(out) / "sample.manifest.json"));
  CHECK(manifest["seed"] == 9);
  CHECK(manifest["outputs"].size() == 5);  // three archives plus mu_theta and its sidecar
  CHECK(manifest["config_hash"] == cli::parse_config(nlohmann::json::parse(kGas)).hash());

  const Run an = run({"--config", cfg.string(), "--out-dir", out, "analyze"});
  CHECK(an.code == cli::kOk);
  const nlohmann::json analysis = nlohmann::json::parse(std::ifstream(fs::path(out) / "analysis.json"));
  CHECK(analysis["results"].contains("one_point"));
  CHECK(analysis["results"]["one_point"]["cells"].size() == 64);
  CHECK(analysis["checks"].contains("poisson"));

  const Run rep = run({"--out-dir", out, "report"});
  CHECK(rep.code == cli::kOk);
  CHECK(fs::exists(fs::path(out) / "report" / "one_point_ratio.csv"));
  CHECK(fs::exists(fs::path(out) / "report" / "summary.csv"));

  SUBCASE("a different seed gives different archives") {
    const std::string other = (s.dir / "other").string();
    REQUIRE(run({"--config", cfg.string(), "--out-dir", other, "--seed", "10", "sample"}).code == cli::kOk);
    CHECK(cli::sha256_file(fs::path(other) / "replica_000.c2da") != cli::sha256_file(fs::path(out) / "replica_000.c2da"));
    CHECK(read_archive(fs::path(other) / "replica_000.c2da").header()["format"] ==
          read_archive(fs::path(out) / "replica_000.c2da").header()["format"]);
  }
  SUBCASE("missing sidecar") {
    fs::remove(sidecar_path(fs::path(out) / "mu_theta.c2dg"));
    CHECK(run({"--config", cfg.string(), "--out-dir", out, "analyze"}).code == cli::kMissingData);
  }
  SUBCASE("corrupt archive") {
    std::ofstream(fs::path(out) / "replica_001.c2da", std::ios::binary) << "garbage";
    CHECK(run({"--config", cfg.string(), "--out-dir", out, "analyze"}).code == cli::kMissingData);
  }
  SUBCASE("too few frames for the estimators") {
    const fs::path thin = s.write("thin.json", R"({"n": 48, "beta_rule": "N^-0.9", "grid": {"cells": 96},
      "sampler": {"seed": 9, "frames": 10, "thinning": 48, "replicas": 1}})");
    const std::string d = (s.dir / "thin").string();
    REQUIRE(run({"--config", thin.string(), "--out-dir", d, "sample"}).code == cli::kOk);
    const Run r = run({"--config", thin.string(), "--out-dir", d, "analyze"});
    CHECK(r.code == cli::kStatisticsFailure);
    CHECK(r.err.find("poisson") != std::string::npos);
  }
}
