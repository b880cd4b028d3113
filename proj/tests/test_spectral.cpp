#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <numbers>

#include "dsheat/spectral.hpp"

using namespace dsheat;

namespace {
const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;
const double kInf = std::numeric_limits<double>::infinity();

// Largest root of lambda (lambda - 1) = c.
double quadratic_root(double c) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * c)); }
}  // namespace

TEST_CASE("Upsilon for the simple walk") {
  SpectralProfile p(WalkKernel::simple(1));
  CHECK(std::abs(upsilon(p, 2.0, UpsilonMethod::series) - 1.0 / std::sqrt(2.0)) < 1e-10);
  CHECK(std::abs(upsilon(p, 2.0, UpsilonMethod::quadrature) - 0.70710678118654752) < 1e-10);
  CHECK(std::abs(upsilon(p, kGolden, UpsilonMethod::series) - 1.0) < 1e-8);
  CHECK(upsilon(p, 1e6, UpsilonMethod::series) < 2e-6);
  CHECK(upsilon(p, 1e6, UpsilonMethod::quadrature) < 2e-6);
  CHECK_THROWS_AS(upsilon(p, 1.0, UpsilonMethod::series), std::invalid_argument);
  CHECK_THROWS_AS(upsilon(p, 0.5, UpsilonMethod::quadrature), std::invalid_argument);
  const auto sv = upsilon_series(p, 1.5);
  CHECK(sv.converged);
  CHECK(sv.error_bound < 1e-13);
}

TEST_CASE("series and quadrature agree") {
  for (const auto& k : {WalkKernel::simple(1), WalkKernel::lazy(1, 0.5), WalkKernel::simple(2),
                        WalkKernel::lazy(2, 0.3)}) {
    SpectralProfile p(k);
    for (double l : {1.2, 1.5, 2.0, 5.0})
      CHECK(std::abs(upsilon(p, l, UpsilonMethod::series) - upsilon(p, l, UpsilonMethod::quadrature)) < 1e-8);
  }
}

TEST_CASE("Upsilon is strictly decreasing") {
  for (const auto& k : {WalkKernel::simple(1), WalkKernel::lazy(2, 0.5), WalkKernel::simple(3)}) {
    SpectralProfile p(k);
    double prev = kInf;
    for (double l = 1.05; l < 20.0; l *= 1.3) {
      const double v = upsilon_series(p, l).value;
      CHECK(v > 0.0);
      CHECK(v < prev);
      prev = v;
    }
  }
}

TEST_CASE("extended inverse") {
  SpectralProfile p(WalkKernel::simple(1));
  CHECK(std::abs(upsilon_inverse(p, 1.0) - kGolden) < 1e-9);
  CHECK(std::abs(upsilon_inverse(p, 1.0 / std::sqrt(2.0)) - 2.0) < 1e-9);
  CHECK(upsilon_inverse(p, kInf) == 0.0);
  CHECK_THROWS_AS(upsilon_inverse(p, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(upsilon_inverse(p, -1.0), std::invalid_argument);
  for (double x : {0.05, 0.25, 0.5, 1.0, 2.0, 4.0}) {
    const double l = upsilon_inverse(p, x);
    CHECK(std::abs(l - quadratic_root(1.0 / (x * x))) < 1e-9 * l);
    CHECK(std::abs(upsilon_series(p, l).value - x) < 1e-8);
  }
}

TEST_CASE("inverse returns 1 when the defining set is empty") {
  // The 3-d simple walk is transient: Upsilon stays bounded as lambda drops to 1.
  SpectralProfile p(WalkKernel::simple(3));
  CHECK(upsilon_inverse(p, 100.0) == 1.0);
  const double l = upsilon_inverse(p, 0.5);
  CHECK(l > 1.0);
  CHECK(std::abs(upsilon_series(p, l).value - 0.5) < 1e-8);
}

TEST_CASE("round trip on lazy and planar kernels") {
  for (const auto& k : {WalkKernel::lazy(1, 0.5), WalkKernel::simple(2)}) {
    SpectralProfile p(k);
    for (double x : {0.25, 0.5, 1.0, 2.0}) {
      const double l = upsilon_inverse(p, x);
      REQUIRE(l > 1.0);
      CHECK(std::abs(upsilon_series(p, l).value - x) < 1e-8);
    }
  }
}

TEST_CASE("Burkholder constant") {
  CHECK(burkholder_constant(2.0) == 1.0);
  CHECK(burkholder_constant(4.0) == doctest::Approx(83.1384387633).epsilon(1e-10));
  CHECK(burkholder_constant(3.0) == doctest::Approx(66.1362230551).epsilon(1e-10));
  CHECK_THROWS_AS(burkholder_constant(1.5), std::invalid_argument);
}

TEST_CASE("moment exponent bounds") {
  SpectralProfile p(WalkKernel::simple(1));
  const auto b = liapounov_bounds(p, 2.0, SigmaSpec::linear(1.0));
  CHECK(std::abs(b.upper - 0.5 * std::log(kGolden)) < 1e-9);
  CHECK(std::abs(b.lower - b.upper) < 1e-12);
  CHECK(std::abs(b.upper - 0.2406059) < 1e-7);

  const auto z = liapounov_bounds(p, 2.0, SigmaSpec::linear(0.0));
  CHECK(z.upper == -kInf);
  CHECK(z.lower == -kInf);

  SigmaSpec::Constants c{1.0, 0.5, 1.0, 0.0};
  const auto s = SigmaSpec::custom([](double x) { return x >= 0 ? x : 0.5 * x; }, c, "kinked");
  const auto k = liapounov_bounds(p, 2.0, s);
  // Upsilon^{-1}(4) solves lambda (lambda - 1) = 1/16.
  const double root = quadratic_root(1.0 / 16.0);
  CHECK(std::abs(root - 1.0590169943749475) < 1e-15);
  CHECK(std::abs(k.lower - 0.5 * std::log(root)) < 1e-9);
  CHECK(std::abs(k.lower - 0.028670) < 1e-6);
  CHECK(k.lower <= k.upper);
}

TEST_CASE("upper bound is monotone in the Lipschitz constant") {
  SpectralProfile p(WalkKernel::lazy(1, 0.5));
  for (double q : {2.0, 3.0}) {
    double prev = -kInf;
    for (double nu : {0.0, 0.001, 0.01, 0.1, 0.5, 1.0, 2.0}) {
      const double u = liapounov_bounds(p, q, SigmaSpec::linear(nu)).upper;
      CHECK(u >= prev);
      prev = u;
    }
  }
}

TEST_CASE("simple-walk closed forms") {
  CHECK(simple_walk::overlap(2) == 0.375);
  SpectralProfile p(WalkKernel::simple(1));
  for (int n = 0; n <= 20; ++n) CHECK(std::abs(p.q(n) - simple_walk::overlap(n)) < 1e-12);
  double series = 0.0;
  for (int n = 0; n < 200; ++n) series += simple_walk::overlap(n) * std::pow(0.5, n);
  CHECK(std::abs(series - std::sqrt(2.0)) < 1e-12);
  CHECK(std::abs(simple_walk::overlap_generating_function(0.5) - std::sqrt(2.0)) < 1e-15);
  for (double l : {1.2, 1.5, 2.0, 5.0}) {
    const double closed = std::pow(1.0 - 1.0 / l, -0.5);
    CHECK(std::abs(l * simple_walk::upsilon(l) - closed) < 1e-12);
    CHECK(std::abs(l * upsilon_series(p, l).value - closed) < 1e-8);
    CHECK(std::abs(l * upsilon_quadrature(WalkKernel::simple(1), l) - closed) < 1e-8);
  }
  CHECK(std::abs(simple_walk::threshold_from_generating_function(1.0) - kGolden) < 1e-12);
  CHECK(std::abs(simple_walk::upsilon_inverse_of_nu(1.0) - kGolden) < 1e-15);
  for (double nu : {0.3, 0.5, 1.0, 2.0})
    CHECK(std::abs(simple_walk::threshold_from_generating_function(nu) - upsilon_inverse(p, 1.0 / (nu * nu))) <
          1e-9);
}

TEST_CASE("the confluent series does not match the overlap series") {
  // 1F1(1/2; 1; 1/lambda) carries an extra 1/n! per term.
  const double k = simple_walk::kummer_value(2.0);
  CHECK(std::abs(k - std::sqrt(2.0)) > 0.1);
  double s = 0.0, fact = 1.0;
  for (int n = 0; n < 40; ++n) {
    if (n > 0) fact *= n;
    s += simple_walk::overlap(n) * std::pow(0.5, n) / fact;
  }
  CHECK(std::abs(k - s) < 1e-12);
}
