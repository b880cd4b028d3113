#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "dsheat/walk_kernel.hpp"
#include "random_inputs.hpp"

using namespace dsheat;
using testing::random_field;
using testing::random_kernel;

namespace {

Site s1(int x) { return {x, 0, 0}; }

// Independent oracle: out(x) = sum_y P_{x,y} f(y) by a double loop over sites.
LatticeField brute_transition(const WalkKernel& k, const LatticeField& f) {
  LatticeField out(f.dim());
  f.for_each_nonzero([&](const Site& y, double v) {
    for (const auto& e : k.entries()) out.add(y - e.offset, e.prob * v);
  });
  return out;
}

}  // namespace

TEST_CASE("kernel constructors") {
  const auto s = WalkKernel::simple(1);
  CHECK(s.radius() == 1);
  CHECK(s(s1(-1)) == 0.5);
  CHECK(s(s1(1)) == 0.5);
  CHECK(s(s1(0)) == 0.0);
  CHECK(s.entries().size() == 2);

  const auto l = WalkKernel::lazy(1, 0.5);
  CHECK(l(s1(-1)) == 0.25);
  CHECK(l(s1(0)) == 0.5);
  CHECK(l(s1(1)) == 0.25);
  CHECK(l.stay_probability() == 0.5);

  const auto c = WalkKernel::custom(2, {{{0, 0, 0}, 0.9}, {{1, 0, 0}, 0.05}, {{-1, 0, 0}, 0.05}});
  CHECK(c.radius() == 1);
  CHECK(c.dim() == 2);
  CHECK(c.is_symmetric());

  CHECK(WalkKernel::simple(3).entries().size() == 6);
  CHECK(WalkKernel::lazy(2, 0.2)(Site{0, 1, 0}) == doctest::Approx(0.2));
  CHECK(WalkKernel::custom(1, {{s1(0), 1.0}}).radius() == 0);
}

TEST_CASE("kernel validation") {
  CHECK_THROWS_AS(WalkKernel::custom(1, {{s1(0), 1.1}, {s1(1), -0.1}}), std::invalid_argument);
  CHECK_THROWS_AS(WalkKernel::custom(1, {{s1(0), 0.5}, {s1(1), 0.5 + 2e-12}}), std::invalid_argument);
  CHECK_NOTHROW(WalkKernel::custom(1, {{s1(0), 0.5}, {s1(1), 0.5 + 5e-13}}));
  CHECK_THROWS_AS(WalkKernel::custom(1, {{s1(1), 0.5}, {s1(1), 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(WalkKernel::custom(1, {{{0, 1, 0}, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(WalkKernel::custom(1, {{s1(0), std::numeric_limits<double>::infinity()}}), std::invalid_argument);
  CHECK_THROWS_AS(WalkKernel::lazy(1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(WalkKernel::lazy(1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(WalkKernel::simple(0), std::invalid_argument);
}

TEST_CASE("one step of the transition operator") {
  const auto s = WalkKernel::simple(1);
  const auto u = apply_transition(s, LatticeField::delta(1));
  CHECK(u(s1(-1)) == 0.5);
  CHECK(u(s1(1)) == 0.5);
  CHECK(u(s1(0)) == 0.0);
  CHECK(apply_transition(s, LatticeField(1)).is_zero());

  const auto l = WalkKernel::lazy(1, 0.5);
  auto two = apply_transition(l, apply_transition(l, LatticeField::delta(1)));
  CHECK(two(s1(-2)) == 0.0625);
  CHECK(two(s1(-1)) == 0.25);
  CHECK(two(s1(0)) == 0.375);
  CHECK(two(s1(1)) == 0.25);
  CHECK(two(s1(2)) == 0.0625);
}

TEST_CASE("n-step kernels") {
  const auto s = WalkKernel::simple(1);
  const auto k2 = n_step_kernel(s, 2);
  CHECK(k2(s1(-2)) == 0.25);
  CHECK(k2(s1(0)) == 0.5);
  CHECK(k2(s1(2)) == 0.25);
  CHECK(k2.entries().size() == 3);
  const auto k3 = n_step_kernel(s, 3);
  CHECK(k3(s1(-3)) == 0.125);
  CHECK(k3(s1(-1)) == 0.375);
  CHECK(k3(s1(1)) == 0.375);
  CHECK(k3(s1(3)) == 0.125);
  const auto k0 = n_step_kernel(WalkKernel::lazy(2, 0.3), 0);
  CHECK(k0.entries().size() == 1);
  CHECK(k0(Site{0, 0, 0}) == 1.0);
}

TEST_CASE("transition matches a brute-force double loop and conserves mass") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int dim = 1 + trial % 3;
    const auto k = random_kernel(rng, dim, 1 + trial % 2);
    const auto f = random_field(rng, dim, 3);
    const auto fast = apply_transition(k, f);
    CHECK(max_abs_diff(fast, brute_transition(k, f)) < 1e-14);
    const double mass = f.total();
    CHECK(std::abs(fast.total() - mass) <= 1e-10 * std::max(1.0, std::abs(mass)));
    CHECK(fast.support_radius() <= f.support_radius() + k.radius());
  }
}

TEST_CASE("kernel powers against repeated transitions") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int dim = 1 + trial % 2;
    const auto k = random_kernel(rng, dim, 1);
    const auto powers = kernel_powers(k, 8);
    LatticeField u = LatticeField::delta(dim);
    for (int n = 0; n <= 8; ++n) {
      const auto& slice = powers[static_cast<std::size_t>(n)];
      double mass = 0.0;
      int radius = 0;
      slice.probs.for_each_nonzero([&](const Site& z, double p) {
        CHECK(p >= 0.0);
        mass += p;
        radius = std::max(radius, max_norm(z));
        // P^n delta_0 evaluated at x is P^n_{0,-x}; equal entrywise only after reflection.
        CHECK(std::abs(u(-z) - p) < 1e-12);
      });
      CHECK(std::abs(mass - 1.0) < 1e-10);
      CHECK(radius <= n * k.radius());
      u = apply_transition(k, u);
    }
  }
  const auto s = WalkKernel::lazy(2, 0.4);
  LatticeField u = LatticeField::delta(2);
  for (int n = 0; n < 6; ++n) u = apply_transition(s, u);
  CHECK(max_abs_diff(u, n_step_kernel(s, 6).probs) < 1e-12);
}

TEST_CASE("characteristic function") {
  const double pi = std::numbers::pi;
  const auto s = WalkKernel::simple(1);
  const double zero[] = {0.0};
  const double half_pi[] = {pi / 2};
  const double full_pi[] = {pi};
  CHECK(std::abs(char_function(s, zero) - 1.0) < 1e-15);
  CHECK(std::abs(char_function(s, half_pi)) < 1e-15);
  CHECK(std::abs(char_function(WalkKernel::lazy(1, 0.5), full_pi)) < 1e-15);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-pi, pi);
  const auto k = random_kernel(rng, 2, 2);
  for (int i = 0; i < 100; ++i) {
    const double xi[] = {u(rng), u(rng)};
    CHECK(std::abs(char_function(k, xi)) <= 1.0 + 1e-15);
  }
}

TEST_CASE("overlaps") {
  const auto s = WalkKernel::simple(1);
  CHECK(overlap_q(s, 0, OverlapMethod::convolution) == 1.0);
  CHECK(overlap_q(s, 1, OverlapMethod::convolution) == 0.5);
  CHECK(overlap_q(s, 3, OverlapMethod::convolution) == doctest::Approx(0.3125).epsilon(1e-15));
  CHECK(overlap_q(WalkKernel::lazy(1, 0.5), 1, OverlapMethod::convolution) == 0.375);
  const auto seq = overlap_sequence(WalkKernel::lazy(2, 0.3), 10);
  for (std::size_t k = 1; k < seq.size(); ++k) {
    CHECK(seq[k] > 0.0);
    CHECK(seq[k] <= seq[k - 1] + 1e-15);
  }
}

TEST_CASE("Plancherel: convolution and quadrature overlaps agree") {
  std::mt19937_64 rng(5);
  std::vector<WalkKernel> kernels{WalkKernel::simple(1), WalkKernel::lazy(1, 0.5), WalkKernel::simple(2),
                                  WalkKernel::lazy(2, 0.25), random_kernel(rng, 1, 2), random_kernel(rng, 2, 1)};
  for (const auto& k : kernels)
    for (int n = 0; n <= 20; ++n)
      CHECK(std::abs(overlap_q(k, n, OverlapMethod::convolution) - overlap_q(k, n, OverlapMethod::quadrature)) <
            1e-10);
}
