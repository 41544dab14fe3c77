#include <doctest.h>

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/bessel.hpp>

#include "coulomb2d/errors.hpp"
#include "coulomb2d/kernel.hpp"
#include "coulomb2d/rng.hpp"
#include "oracles.hpp"

using namespace coulomb2d;
using kernel::SmearingRadius;
constexpr double pi = std::numbers::pi;

TEST_CASE("coulomb_g values and singularity") {
  CHECK(kernel::coulomb_g({1.0, 0.0}) == 0.0);
  CHECK(kernel::coulomb_g({0.0, std::exp(-1.0)}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(kernel::coulomb_g({2.0, 0.0}) == doctest::Approx(-0.6931471805599453).epsilon(1e-15));
  CHECK(kernel::coulomb_g({0.6, 0.8}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(kernel::coulomb_g({0.0, 0.0}), SingularityError);
}

TEST_CASE("smearing radius must be positive") {
  CHECK_THROWS_AS(SmearingRadius(0.0), PreconditionError);
  CHECK_THROWS_AS(SmearingRadius(-1.0), PreconditionError);
  CHECK_THROWS_AS(SmearingRadius(std::nan("")), PreconditionError);
}

TEST_CASE("smeared_g against circle quadrature") {
  const double eta = 0.01;
  const Vec2 x{2.0 * eta * std::cos(0.3), 2.0 * eta * std::sin(0.3)};
  const double ref = oracle::circle_average_log(x, eta);
  CHECK(ref == doctest::Approx(-std::log(0.02)).epsilon(1e-10));
  CHECK(kernel::smeared_g(x, SmearingRadius(eta)) == doctest::Approx(ref).epsilon(1e-10));
  CHECK(kernel::smeared_g({0.0, 0.0}, SmearingRadius(0.5)) == doctest::Approx(-std::log(0.5)).epsilon(1e-14));
  CHECK(kernel::smeared_g({1.0, 0.0}, SmearingRadius(0.1)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  // inside the circle the average is constant
  CHECK(kernel::smeared_g({0.1, 0.2}, SmearingRadius(0.5)) == doctest::Approx(-std::log(0.5)).epsilon(1e-14));
}

TEST_CASE("psi_smeared_g outside and on the support boundary equals g") {
  const SmearingRadius eta(0.1);
  const Vec2 far{0.3 * std::cos(1.1), 0.3 * std::sin(1.1)};
  CHECK(kernel::psi_smeared_g(far, eta) == doctest::Approx(kernel::coulomb_g(far)).epsilon(1e-14));
  const Vec2 edge{0.2, 0.0};
  CHECK(kernel::psi_smeared_g(edge, eta) == doctest::Approx(kernel::coulomb_g(edge)).epsilon(1e-12));
}

TEST_CASE("psi_smeared_g against nested circle quadrature") {
  CHECK(kernel::psi_smeared_g({0.0, 0.0}, SmearingRadius(0.5)) == doctest::Approx(-std::log(0.5)).epsilon(1e-12));
  Xoshiro256 rng = Xoshiro256::stream(99, {1});
  const double eta = 0.37;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double r = 2.2 * eta * rng.uniform(), a = 2.0 * pi * rng.uniform();
    const Vec2 x{r * std::cos(a), r * std::sin(a)};
    const double ref = oracle::nested_circle_log(x, eta);
    const double got = kernel::psi_smeared_g(x, SmearingRadius(eta));
    worst = std::max(worst, std::abs(got - ref) / std::max(1.0, std::abs(ref)));
  }
  CHECK(worst < 1e-8);
  CHECK(kernel::psi_smeared_g_radial(0.25, eta) ==
        doctest::Approx(kernel::psi_smeared_g({0.0, 0.25}, SmearingRadius(eta))).epsilon(1e-13));
}

TEST_CASE("kernel gap L1 norm") {
  const auto one = kernel::kernel_gap_l1(SmearingRadius(1.0));
  CHECK(one.value == doctest::Approx(pi / 2).epsilon(1e-14));
  CHECK(one.quadrature == doctest::Approx(pi / 2).epsilon(1e-10));
  const auto small = kernel::kernel_gap_l1(SmearingRadius(0.1));
  CHECK(small.value == doctest::Approx(pi * 0.01 / 2).epsilon(1e-14));
  const double radial = oracle::integrate([](double r) { return 2.0 * pi * r * std::log(0.1 / r); }, 0.0, 0.1);
  CHECK(small.quadrature == doctest::Approx(radial).epsilon(1e-10));
  CHECK(kernel::kernel_gap_l1(SmearingRadius(0.2)).value / small.value == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("Bessel J0 and the circle transform") {
  CHECK(kernel::sphere_fourier({0.0, 0.0}) == 1.0);
  CHECK(std::abs(kernel::sphere_fourier({2.404825557695773, 0.0})) < 1e-10);
  CHECK(kernel::sphere_fourier({0.6, 0.8}) == doctest::Approx(0.7651976865579666).epsilon(1e-14));
  for (double r : {0.1, 1.0, 2.5, 7.3, 12.0, 16.9, 17.1, 25.0, 60.0, 300.0}) {
    CAPTURE(r);
    CHECK(std::abs(kernel::bessel_j0(r) - boost::math::cyl_bessel_j(0, r)) < 1e-12);
  }
  for (double r : {0.5, 3.0, 9.0}) CHECK(std::abs(kernel::bessel_j0(r) - oracle::j0_series(r)) < 1e-13);
}

TEST_CASE("kernel Fourier transform") {
  CHECK(kernel::kernel_fourier({1.0, 0.0}) == doctest::Approx(1.0 / (2.0 * pi)).epsilon(1e-15));
  CHECK(kernel::kernel_fourier({0.0, 2.0}) == doctest::Approx(1.0 / (8.0 * pi)).epsilon(1e-15));
  CHECK_THROWS_AS(kernel::kernel_fourier({0.0, 0.0}), SingularityError);
}

TEST_CASE("log integrals over rectangles") {
  auto rect = [](double x0, double x1, double y0, double y1) {
    return oracle::integrate(
        [&](double x) {
          return oracle::integrate([&](double y) { return -0.5 * std::log(x * x + y * y); }, y0, y1,
                                   (y0 < 0.0 && y1 > 0.0) ? std::vector<double>{0.0} : std::vector<double>{});
        },
        x0, x1, (x0 < 0.0 && x1 > 0.0) ? std::vector<double>{0.0} : std::vector<double>{});
  };
  CHECK(kernel::log_rectangle_integral(0.5, 1.5, 0.2, 0.9) == doctest::Approx(rect(0.5, 1.5, 0.2, 0.9)).epsilon(1e-10));
  CHECK(kernel::log_rectangle_integral(-0.5, 0.5, -0.5, 0.5) ==
        doctest::Approx(rect(-0.5, 0.5, -0.5, 0.5)).epsilon(1e-8));
  // far cells look like point charges
  CHECK(kernel::log_unit_cell_pair_integral(40, 0) == doctest::Approx(-std::log(40.0)).epsilon(1e-4));
  CHECK(kernel::log_unit_cell_pair_integral(3, 2) == doctest::Approx(kernel::log_unit_cell_pair_integral(-3, -2)));
  CHECK(kernel::log_unit_cell_pair_integral(3, 2) == doctest::Approx(kernel::log_unit_cell_pair_integral(2, 3)));
}
