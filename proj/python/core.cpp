// Python bindings: thin wrappers that move point sets and densities through
// numpy arrays and keep the library's error types distinguishable.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "coulomb2d/cli.hpp"
#include "coulomb2d/energy.hpp"
#include "coulomb2d/statistics.hpp"

namespace py = pybind11;
using namespace coulomb2d;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Vec2> to_points(const Points& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw py::value_error("points must have shape (n, 2)");
  std::vector<Vec2> out(static_cast<std::size_t>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[static_cast<std::size_t>(i)] = {r(i, 0), r(i, 1)};
  return out;
}

py::array_t<double> from_points(std::span<const Vec2> p, std::vector<py::ssize_t> shape) {
  py::array_t<double> a(shape);
  std::copy_n(reinterpret_cast<const double*>(p.data()), 2 * p.size(), a.mutable_data());
  return a;
}

py::array_t<double> grid_array(const GridGeometry& g, std::span<const double> v) {
  py::array_t<double> a({static_cast<py::ssize_t>(g.ny), static_cast<py::ssize_t>(g.nx)});
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

PotentialSpec potential(const std::string& name, const std::map<std::string, double>& params) {
  return potentials::from_name(name, params);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-dimensional Coulomb gas: kernels, equilibrium measures, energies, sampler and statistics";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<SingularityError>(m, "SingularityError", base);
  py::register_exception<PreconditionError>(m, "PreconditionError", base);
  py::register_exception<DomainError>(m, "DomainError", base);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base);
  py::register_exception<SamplerError>(m, "SamplerError", base);
  py::register_exception<StatisticsError>(m, "StatisticsError", base);
  py::register_exception<FormatError>(m, "FormatError", base);

  // kernel
  m.def("coulomb_g", [](double x, double y) { return kernel::coulomb_g({x, y}); });
  m.def("smeared_g", [](double x, double y, double eta) { return kernel::smeared_g({x, y}, kernel::SmearingRadius(eta)); });
  m.def("psi_smeared_g",
        [](double x, double y, double eta) { return kernel::psi_smeared_g({x, y}, kernel::SmearingRadius(eta)); });
  m.def("bessel_j0", &kernel::bessel_j0);
  m.def("kernel_fourier", [](double x, double y) { return kernel::kernel_fourier({x, y}); });

  // grids and measures
  py::class_<GridGeometry>(m, "GridGeometry")
      .def_static("centered", &GridGeometry::centered, py::arg("half_width"), py::arg("cells"))
      .def_readonly("cell", &GridGeometry::cell)
      .def_readonly("nx", &GridGeometry::nx)
      .def_readonly("ny", &GridGeometry::ny)
      .def_property_readonly("origin", [](const GridGeometry& g) { return std::pair{g.origin.x, g.origin.y}; })
      .def("__repr__", [](const GridGeometry& g) {
        std::ostringstream os;
        os << "GridGeometry(nx=" << g.nx << ", ny=" << g.ny << ", cell=" << g.cell << ")";
        return os.str();
      });

  py::class_<GridMeasure>(m, "GridMeasure")
      .def(py::init([](const GridGeometry& g, py::array_t<double, py::array::c_style | py::array::forcecast> d,
                       bool is_signed) {
             if (static_cast<std::size_t>(d.size()) != g.size()) throw py::value_error("density size does not match grid");
             return GridMeasure(g, std::vector<double>(d.data(), d.data() + d.size()), is_signed);
           }),
           py::arg("grid"), py::arg("density"), py::arg("signed") = false)
      .def_property_readonly("grid", &GridMeasure::geometry)
      .def_property_readonly("density", [](const GridMeasure& mu) { return grid_array(mu.geometry(), mu.density()); })
      .def_property_readonly("mass", &GridMeasure::mass);

  m.def("l1_distance", &l1_distance);
  m.def("grid_potential", [](const GridMeasure& mu, double x, double y) { return grid_potential(mu, Vec2{x, y}); });

  // equilibrium
  py::class_<EquilibriumSolution>(m, "EquilibriumSolution")
      .def_readonly("mu", &EquilibriumSolution::mu)
      .def_readonly("c_V", &EquilibriumSolution::c_V)
      .def_readonly("residual", &EquilibriumSolution::residual)
      .def_readonly("iterations", &EquilibriumSolution::iterations);
  m.def(
      "solve_equilibrium",
      [](const GridGeometry& g, const std::string& name, const std::map<std::string, double>& params) {
        return solve_equilibrium(potential(name, params), g);
      },
      py::arg("grid"), py::arg("potential") = "quadratic", py::arg("params") = std::map<std::string, double>{});

  py::class_<ThermalSolution>(m, "ThermalSolution")
      .def_readonly("mu", &ThermalSolution::mu_theta)
      .def_readonly("theta", &ThermalSolution::theta)
      .def_readonly("c_theta", &ThermalSolution::c_theta)
      .def_readonly("residual", &ThermalSolution::residual)
      .def_readonly("iterations", &ThermalSolution::iterations)
      .def("density_at", [](const ThermalSolution& s, double x, double y) { return std::exp(s.log_density.interpolate({x, y})); });
  m.def(
      "solve_thermal",
      [](double theta, const GridGeometry& g, const std::string& name, const std::map<std::string, double>& params) {
        return solve_thermal(potential(name, params), theta, g);
      },
      py::arg("theta"), py::arg("grid"), py::arg("potential") = "quadratic",
      py::arg("params") = std::map<std::string, double>{});

  // energies
  m.def(
      "hamiltonian",
      [](const Points& X, const std::string& name, const std::map<std::string, double>& params) {
        return hamiltonian(ParticleConfiguration(to_points(X)), potential(name, params));
      },
      py::arg("points"), py::arg("potential") = "quadratic", py::arg("params") = std::map<std::string, double>{});
  m.def("mean_field_energy", [](const GridMeasure& mu) { return mean_field_energy(mu).value; });
  m.def("fourier_energy", [](const GridMeasure& nu) { return fourier_energy(nu); });
  m.def(
      "splitting_residual",
      [](const Points& X, const ThermalSolution& sol, const std::string& name,
         const std::map<std::string, double>& params) {
        return splitting_residual(ParticleConfiguration(to_points(X)), potential(name, params), sol).relative;
      },
      py::arg("points"), py::arg("solution"), py::arg("potential") = "quadratic",
      py::arg("params") = std::map<std::string, double>{});

  // sampler
  py::class_<GasConfig>(m, "GasConfig")
      .def(py::init([](std::size_t n, double beta, std::uint64_t seed, std::uint64_t frames, std::uint64_t thinning,
                       std::uint64_t burn_in, std::size_t replicas) {
             GasConfig c;
             c.n = n;
             c.beta = beta;
             c.seed = seed;
             c.thinning = thinning;
             c.burn_in = burn_in;
             c.replicas = replicas;
             c.steps = c.effective_burn_in() + frames * c.effective_thinning();
             c.validate();
             return c;
           }),
           py::arg("n"), py::arg("beta"), py::arg("seed") = 1, py::arg("frames") = 100, py::arg("thinning") = 0,
           py::arg("burn_in") = 0, py::arg("replicas") = 1)
      .def_readonly("n", &GasConfig::n)
      .def_readonly("beta", &GasConfig::beta)
      .def_property_readonly("theta", &GasConfig::theta);

  py::class_<SampleArchive>(m, "SampleArchive")
      .def_readonly("replica", &SampleArchive::replica)
      .def_property_readonly("frames", &SampleArchive::frames)
      .def_property_readonly("positions",
                             [](const SampleArchive& a) {
                               return from_points(a.positions, {static_cast<py::ssize_t>(a.frames()),
                                                                static_cast<py::ssize_t>(a.n), 2});
                             })
      .def_readonly("energies", &SampleArchive::energies)
      .def_property_readonly("acceptance", [](const SampleArchive& a) { return a.stats.acceptance; })
      .def_property_readonly("audit_drift", [](const SampleArchive& a) { return a.stats.max_audit_drift; });
  m.def(
      "run_replicas",
      [](const GasConfig& c, const ThermalSolution& sol, std::size_t threads) {
        py::gil_scoped_release unlock;
        return run_replicas(c, sol, threads);
      },
      py::arg("config"), py::arg("solution"), py::arg("threads") = 1);
  m.def("write_archive", [](const std::string& path, const SampleArchive& a) { write_archive(path, a); });
  m.def("read_archive", [](const std::string& path) { return read_archive(path); });

  // statistics
  py::class_<PoissonTest>(m, "PoissonTest")
      .def_readonly("lambda_", &PoissonTest::lambda)
      .def_readonly("mean_count", &PoissonTest::mean_count)
      .def_readonly("chi_square", &PoissonTest::chi_square)
      .def_readonly("p_value", &PoissonTest::p_value)
      .def_readonly("tv", &PoissonTest::tv)
      .def_readonly("effective_frames", &PoissonTest::effective_frames);
  py::class_<PointProcessSample>(m, "PointProcessSample")
      .def_property_readonly("points", [](const PointProcessSample& s) {
        return from_points(s.points, {static_cast<py::ssize_t>(s.points.size()), 2});
      });
  m.def(
      "synthetic_poisson",
      [](double lambda, double side, std::size_t frames, std::uint64_t seed, std::size_t replicas) {
        Xoshiro256 rng = Xoshiro256::stream(seed, {});
        return synthetic_poisson(lambda, Box::square(side), frames, rng, replicas);
      },
      py::arg("lam"), py::arg("side") = 8.0, py::arg("frames") = 1000, py::arg("seed") = 1, py::arg("replicas") = 8);
  m.def(
      "local_processes",
      [](const std::vector<SampleArchive>& a, double x, double y, double side) {
        return local_processes(a, {x, y}, Box::square(side));
      },
      py::arg("archives"), py::arg("x") = 0.0, py::arg("y") = 0.0, py::arg("side") = 8.0);
  m.def(
      "poisson_count_test",
      [](const std::vector<PointProcessSample>& s, double lambda, double side, double min_effective) {
        return poisson_count_test(s, Box::square(side), lambda, min_effective);
      },
      py::arg("samples"), py::arg("lam"), py::arg("side") = 1.0, py::arg("min_effective") = 200.0);
  m.def(
      "correlation",
      [](const std::vector<PointProcessSample>& s, int k) {
        const CorrelationEstimate e = estimate_correlation(s, k);
        return py::make_tuple(e.values, e.std_err);
      },
      py::arg("samples"), py::arg("k") = 1);
  m.def("integrated_autocorrelation", [](const std::vector<double>& x) { return integrated_autocorrelation(x); });
  m.def("ks_uniform", [](std::vector<double> v) { return ks_uniform(std::move(v)).p_value; });

  // the command-line driver, in process
  m.def("cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  });
}
