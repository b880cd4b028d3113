#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dsheat/solver.hpp"
#include "dsheat/spectral.hpp"
#include "random_inputs.hpp"

using namespace dsheat;
using testing::random_kernel;

namespace {

Site s1(int x) { return {x, 0, 0}; }

NoiseModel constant_noise(double c) { return NoiseModel::make(NoiseMode::spacetime, NoiseFamily::constant, c); }

// Hand-rolled update on an explicit site list, for a second opinion on step().
LatticeField naive_step(const LatticeField& u, const WalkKernel& k, const SigmaSpec& s, const NoiseSlice& xi) {
  LatticeField out(u.dim());
  xi.region.dilated(k.radius()).for_each([&](const Site& x, std::size_t) {
    double v = 0.0;
    for (const auto& e : k.entries()) v += e.prob * u(x + e.offset);
    if (xi.region.contains(x)) v += s(u(x)) * xi(x);
    out.add(x, v);
  });
  out.trim();
  return out;
}

}  // namespace

TEST_CASE("one doubling step") {
  const auto u = LatticeField::uniform_box(1, 20, 1.0);
  const auto xi = sample_slice(constant_noise(1.0), 0, u.support_box(), {});
  const auto v = step(u, WalkKernel::simple(1), SigmaSpec::linear(1.0), xi);
  for (int x = -19; x <= 19; ++x) CHECK(v(s1(x)) == 2.0);
  CHECK(v(s1(20)) == 1.5);
  CHECK(v(s1(21)) == 0.5);
}

TEST_CASE("zero sigma reduces a step to the transition") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 1 + trial % 2;
    const auto k = random_kernel(rng, dim, 1);
    const auto u = testing::random_field(rng, dim, 3);
    const auto xi = sample_slice(NoiseModel::white_uniform(), 0, u.support_box(), {1, 0});
    CHECK(max_abs_diff(step(u, k, SigmaSpec::linear(0.0), xi), apply_transition(k, u)) == 0.0);
  }
}

TEST_CASE("hand-evaluated step from a point mass") {
  NoiseSlice xi{0, Box::ball(1, 0), {-1.0}};
  const auto v = step(LatticeField::delta(1), WalkKernel::simple(1), SigmaSpec::linear(1.0), xi);
  CHECK(v(s1(-1)) == 0.5);
  CHECK(v(s1(0)) == -1.0);
  CHECK(v(s1(1)) == 0.5);
  CHECK(v.support_count() == 3);
}

TEST_CASE("step agrees with a naive update") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 1 + trial % 2;
    const auto k = random_kernel(rng, dim, 1 + trial % 3);
    const auto u = testing::random_field(rng, dim, 4);
    if (u.is_zero()) continue;
    const auto xi = sample_slice(NoiseModel::white_rademacher(), 2, u.support_box().dilated(1), {9, 1});
    const auto s = SigmaSpec::linear(0.7);
    CHECK(max_abs_diff(step(u, k, s, xi), naive_step(u, k, s, xi)) < 1e-13);
  }
}

TEST_CASE("partial noise leaves only the noise region resolved") {
  const auto u = LatticeField::uniform_box(1, 3, 1.0);
  const auto xi = sample_slice(NoiseModel::white_rademacher(), 0, Box::ball(1, 2), {});
  const auto v = step(u, WalkKernel::simple(1), SigmaSpec::linear(1.0), xi);
  REQUIRE(v.resolved());
  CHECK(*v.resolved() == Box::ball(1, 2));
  const auto full = step(u, WalkKernel::simple(1), SigmaSpec::linear(1.0),
                         sample_slice(NoiseModel::white_rademacher(), 0, Box::ball(1, 3), {}));
  CHECK(max_abs_diff_resolved(v, full) == 0.0);
  // The next step erodes by R and then runs out of sites.
  auto w = v;
  for (int n = 1; n < 3; ++n)
    w = step(w, WalkKernel::simple(1), SigmaSpec::linear(1.0),
             sample_slice(NoiseModel::white_rademacher(), n, Box::ball(1, 2), {}));
  CHECK(*w.resolved() == Box::ball(1, 0));
  CHECK_THROWS_AS(step(w, WalkKernel::simple(1), SigmaSpec::linear(1.0),
                       sample_slice(NoiseModel::white_rademacher(), 3, Box::ball(1, 2), {})),
                  RegionTooSmall);
}

TEST_CASE("forced dynamics need a box") {
  const auto u0 = LatticeField::delta(1);
  CHECK_THROWS_AS(evolve(WalkKernel::simple(1), SigmaSpec::affine(0.5, 0.1), u0, NoiseModel::white_rademacher(), 3, {}),
                  std::invalid_argument);
  // With a box every step shrinks the resolved region by R.
  const Box box = Box::ball(1, 10);
  const auto t = evolve(WalkKernel::simple(1), SigmaSpec::affine(0.5, 0.1), u0, NoiseModel::white_rademacher(), 10, {},
                        box);
  for (int n = 1; n <= 10; ++n) {
    REQUIRE(t.at(n).resolved());
    CHECK(*t.at(n).resolved() == Box::ball(1, 10 - (n - 1)).intersect(box));
  }
  CHECK_THROWS_AS(evolve(WalkKernel::simple(1), SigmaSpec::affine(0.5, 0.1), u0, NoiseModel::white_rademacher(), 12, {},
                         box),
                  RegionTooSmall);
}

TEST_CASE("doubling trajectory") {
  const int n_max = 30;
  const auto u0 = LatticeField::uniform_box(1, 40, 1.0);
  const auto t = evolve(WalkKernel::simple(1), SigmaSpec::linear(1.0), u0, constant_noise(1.0), n_max, {});
  for (int n = 0; n <= n_max; ++n)
    for (int x = -(40 - n); x <= 40 - n; ++x) REQUIRE(t.at(n)(s1(x)) == std::ldexp(1.0, n));

  // The boxed route gives the same interior.
  const auto b = evolve(WalkKernel::lazy(2, 0.5), SigmaSpec::affine(1.0, 0.0), LatticeField::uniform_box(2, 12, 1.0),
                        constant_noise(1.0), 8, {}, Box::ball(2, 12));
  for (int n = 0; n <= 8; ++n) Box::ball(2, 12 - n).for_each([&](const Site& x, std::size_t) {
      REQUIRE(b.at(n)(x) == std::ldexp(1.0, n));
    });
}

TEST_CASE("zero sigma evolves by kernel powers") {
  const auto k = WalkKernel::lazy(1, 0.3);
  const auto u0 = LatticeField::uniform_box(1, 2, 0.5);
  const auto t = evolve(k, SigmaSpec::linear(0.0), u0, NoiseModel::white_rademacher(), 12, {4, 4});
  for (int n = 0; n <= 12; ++n) CHECK(max_abs_diff(t.at(n), apply_slice(n_step_kernel(k, n), u0)) < 1e-14);
}

TEST_CASE("growth ceiling recursion") {
  std::mt19937_64 rng(7);
  struct Case {
    SigmaSpec sigma;
    NoiseModel noise;
    bool boxed;
  };
  const std::vector<Case> cases{
      {SigmaSpec::linear(1.0), NoiseModel::white_rademacher(), false},
      {SigmaSpec::linear(0.4), NoiseModel::white_uniform(), false},
      {SigmaSpec::affine(0.5, 0.3), NoiseModel::white_rademacher(), true},
      {SigmaSpec::affine(-0.8, -0.2), NoiseModel::white_uniform(), true},
  };
  for (const auto& c : cases) {
    const double cs = c.sigma.growth(), ct = c.sigma.offset(), cx = c.noise.bound();
    for (std::uint64_t r = 0; r < 20; ++r) {
      const auto k = random_kernel(rng, 1, 2);
      const auto u0 = testing::random_field(rng, 1, 2);
      const std::optional<Box> box = c.boxed ? std::optional<Box>(Box::ball(1, 60)) : std::nullopt;
      const auto t = evolve(k, c.sigma, u0, c.noise, 25, {11, r}, box);
      for (int n = 0; n < 25; ++n)
        CHECK(t.at(n + 1).sup_norm() <= t.at(n).sup_norm() * (1.0 + cs * cx) + ct * cx + 1e-12);
    }
  }
  // The pure-growth case in closed form.
  const auto t = evolve(WalkKernel::simple(1), SigmaSpec::linear(1.0), LatticeField::delta(1),
                        NoiseModel::white_rademacher(), 30, {2, 0});
  for (int n = 0; n <= 30; ++n) CHECK(t.at(n).sup_norm() <= std::ldexp(1.0, n));
}

TEST_CASE("evolve is a function of its inputs and stream") {
  const auto k = WalkKernel::lazy(2, 0.4);
  const auto u0 = LatticeField::delta(2);
  const auto a = evolve(k, SigmaSpec::linear(0.8), u0, NoiseModel::white_uniform(), 15, {77, 3});
  const auto b = evolve(k, SigmaSpec::linear(0.8), u0, NoiseModel::white_uniform(), 15, {77, 3});
  const auto c = evolve(k, SigmaSpec::linear(0.8), u0, NoiseModel::white_uniform(), 15, {77, 4});
  for (int n = 0; n <= 15; ++n) CHECK(max_abs_diff(a.at(n), b.at(n)) == 0.0);
  CHECK(max_abs_diff(a.at(15), c.at(15)) > 0.0);
  CHECK(a.meta.replica == 3);
  CHECK(a.meta.seed == 77);
}

TEST_CASE("Duhamel sum reproduces the recursion") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 1 + trial % 2;
    const auto k = random_kernel(rng, dim, 1 + trial % 2);
    const auto sigma = SigmaSpec::linear(unit(rng));
    const auto noise = trial % 3 == 0 ? NoiseModel::white_uniform() : NoiseModel::white_rademacher();
    const auto u0 = testing::random_field(rng, dim, 2);
    const int n_max = 1 + trial % 10;
    const NoiseStream stream{static_cast<std::uint64_t>(trial), 1};
    const auto t = evolve(k, sigma, u0, noise, n_max, stream);
    for (int n = 0; n < n_max; ++n)
      worst = std::max(worst, max_abs_diff_resolved(duhamel_eval(k, sigma, u0, noise, stream, t, n), t.at(n + 1)));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("Duhamel special cases") {
  const auto k = WalkKernel::lazy(1, 0.5);
  const auto u0 = LatticeField::delta(1);
  const auto noise = NoiseModel::white_rademacher();
  const auto t = evolve(k, SigmaSpec::linear(0.3), u0, noise, 10, {5, 0});
  CHECK(max_abs_diff(duhamel_eval(k, SigmaSpec::linear(0.3), u0, noise, {5, 0}, t, 0), t.at(1)) < 1e-15);
  CHECK(max_abs_diff(duhamel_eval(k, SigmaSpec::linear(0.3), u0, noise, {5, 0}, t, 9), t.at(10)) < 1e-10);
  CHECK_THROWS_AS(duhamel_eval(k, SigmaSpec::linear(0.3), u0, noise, {5, 0}, t, 10), std::invalid_argument);

  const auto z = evolve(k, SigmaSpec::linear(0.0), u0, noise, 6, {5, 0});
  CHECK(max_abs_diff(duhamel_eval(k, SigmaSpec::linear(0.0), u0, noise, {5, 0}, z, 5), apply_slice(n_step_kernel(k, 6), u0)) <
        1e-15);

  // Forced dynamics on a box.
  const auto s = SigmaSpec::affine(0.6, 0.2);
  const auto b = evolve(k, s, u0, noise, 8, {5, 1}, Box::ball(1, 15));
  for (int n = 0; n < 8; ++n)
    CHECK(max_abs_diff_resolved(duhamel_eval(k, s, u0, noise, {5, 1}, b, n), b.at(n + 1)) < 1e-12);

  // sigma(0) = 0 inside a box the support outgrows.
  const auto g = evolve(k, SigmaSpec::linear(0.6), u0, noise, 8, {5, 2}, Box::ball(1, 4));
  CHECK(g.at(5).is_exact_everywhere());
  CHECK_FALSE(g.at(6).is_exact_everywhere());
  for (int n = 0; n < 8; ++n)
    CHECK(max_abs_diff_resolved(duhamel_eval(k, SigmaSpec::linear(0.6), u0, noise, {5, 2}, g, n), g.at(n + 1)) < 1e-12);
}

TEST_CASE("support radius grows by at most R per step") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 1 + trial % 2;
    const auto k = random_kernel(rng, dim, 1 + trial % 3);
    const auto t = evolve(k, SigmaSpec::linear(1.0), testing::random_field(rng, dim, 2), NoiseModel::white_rademacher(),
                          12, {3, static_cast<std::uint64_t>(trial)});
    const auto rep = support_metrics(t, k);
    CHECK(rep.all_ok);
    for (std::size_t n = 1; n < rep.rows.size(); ++n) CHECK(rep.rows[n].radius <= rep.rows[n - 1].radius + k.radius());
  }
}

TEST_CASE("support examples") {
  const auto t = evolve(WalkKernel::simple(1), SigmaSpec::linear(1.0), LatticeField::delta(1),
                        NoiseModel::white_rademacher(), 20, {1, 1});
  const auto rep = support_metrics(t, WalkKernel::simple(1));
  for (const auto& row : rep.rows) CHECK(row.radius <= row.n);

  const auto z = evolve(WalkKernel::simple(2), SigmaSpec::linear(1.0), LatticeField(2), NoiseModel::white_rademacher(),
                        5, {});
  for (const auto& f : z.fields) CHECK(f.is_zero());
  for (const auto& row : support_metrics(z, WalkKernel::simple(2)).rows) CHECK(row.count == 0);

  const auto l = evolve(WalkKernel::lazy(2, 0.5), SigmaSpec::linear(0.5), LatticeField::delta(2),
                        NoiseModel::white_uniform(), 5, {1, 2});
  const auto lr = support_metrics(l, WalkKernel::lazy(2, 0.5));
  CHECK(lr.rows[5].ball_count == 121);
  CHECK(lr.rows[5].count <= 121);
  CHECK(lr.rows[5].count == 61);  // the lazy walk only reaches |x|_1 <= 5
}

TEST_CASE("comparison condition") {
  const auto v = check_comparison(WalkKernel::lazy(1, 0.9), SigmaSpec::linear(0.5), NoiseModel::white_rademacher());
  CHECK(v.holds);
  CHECK(v.stay_probability == 0.9);
  CHECK_FALSE(check_comparison(WalkKernel::simple(1), SigmaSpec::linear(1.0), NoiseModel::white_rademacher()).holds);
  CHECK(check_comparison(WalkKernel::lazy(1, 0.5), SigmaSpec::linear(0.5), NoiseModel::white_rademacher()).holds);
  CHECK_FALSE(check_comparison(WalkKernel::lazy(1, 0.5), SigmaSpec::linear(0.5), NoiseModel::white_uniform()).holds);
}

TEST_CASE("paired paths keep their order") {
  const auto k = WalkKernel::lazy(1, 0.9);
  const auto s = SigmaSpec::linear(0.5);
  auto u0 = LatticeField::uniform_box(1, 2, 1.0);
  u0.set(s1(0), 3.0);
  const auto v0 = LatticeField::delta(1, 0.5);
  const auto r = paired_comparison(k, s, NoiseModel::white_rademacher(), u0, v0, 20, 200, 17);
  CHECK(r.verdict.holds);
  CHECK(r.paths == 200);
  CHECK(r.checks > 0);
  CHECK(r.order_violations == 0);
  CHECK(r.positivity_violations == 0);
  CHECK(r.min_gap >= 0.0);

  const auto same = paired_comparison(k, s, NoiseModel::white_rademacher(), u0, u0, 20, 50, 17);
  CHECK(same.order_violations == 0);
  CHECK(same.min_gap == 0.0);

  CHECK_THROWS_AS(paired_comparison(k, s, NoiseModel::white_rademacher(), v0, u0, 5, 10, 1), std::invalid_argument);

  // Without the condition the order does break.
  const auto bad = paired_comparison(WalkKernel::simple(1), SigmaSpec::linear(1.0), NoiseModel::white_rademacher(),
                                     u0, v0, 20, 200, 17);
  CHECK_FALSE(bad.verdict.holds);
  CHECK(bad.order_violations + bad.positivity_violations > 0);
}

TEST_CASE("Picard iterates") {
  const auto k = WalkKernel::simple(1);
  const auto u0 = LatticeField::delta(1);
  const auto noise = NoiseModel::white_rademacher();

  // sigma = 0: one iterate reaches the solution.
  const auto z = picard_iterates(k, SigmaSpec::linear(0.0), u0, noise, {1, 0}, 8, 3);
  for (int n = 0; n <= 8; ++n) {
    CHECK(max_abs_diff(z[1][static_cast<std::size_t>(n)], z[2][static_cast<std::size_t>(n)]) == 0.0);
    CHECK(max_abs_diff(z[1][static_cast<std::size_t>(n)], apply_slice(n_step_kernel(k, n), u0)) < 1e-15);
  }

  // f^(l) is exact up to time l, so n_max + 1 iterations give the solution.
  const auto s = SigmaSpec::linear(0.3);
  const auto f = picard_iterates(k, s, u0, noise, {1, 0}, 10, 11);
  const auto t = evolve(k, s, u0, noise, 10, {1, 0});
  for (int n = 0; n <= 10; ++n) CHECK(max_abs_diff(f[11][static_cast<std::size_t>(n)], t.at(n)) < 1e-12);
  CHECK_THROWS_AS(picard_iterates(k, SigmaSpec::affine(0.3, 0.1), u0, noise, {}, 3, 3), std::invalid_argument);
}

TEST_CASE("Picard diagnostics") {
  PicardOptions opt;
  opt.n_max = 15;
  opt.iterations = 5;
  opt.replicas = 600;
  opt.seed = 4;
  const auto k = WalkKernel::simple(1);
  const auto rep = picard_solve(k, SigmaSpec::linear(0.3), LatticeField::delta(1), NoiseModel::white_rademacher(), opt);
  CHECK(rep.predicted_factor == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(rep.contraction_expected);
  CHECK(rep.warning.empty());
  REQUIRE(rep.ratio.size() == 4);
  for (std::size_t l = 0; l < rep.ratio.size(); ++l) CHECK(rep.ratio[l] <= 0.3 + 3.0 * rep.ratio_se[l]);

  const auto zero = picard_solve(k, SigmaSpec::linear(0.0), LatticeField::delta(1), NoiseModel::white_rademacher(), opt);
  CHECK(zero.distance[0] > 0.0);
  for (std::size_t l = 1; l < zero.distance.size(); ++l) CHECK(zero.distance[l] == 0.0);

  const auto loud = picard_solve(k, SigmaSpec::linear(2.0), LatticeField::delta(1), NoiseModel::white_rademacher(), opt);
  CHECK_FALSE(loud.contraction_expected);
  CHECK_FALSE(loud.warning.empty());

  auto w4 = opt;
  w4.workers = 4;
  const auto rep4 = picard_solve(k, SigmaSpec::linear(0.3), LatticeField::delta(1), NoiseModel::white_rademacher(), w4);
  CHECK(rep4.distance == rep.distance);
  CHECK(rep4.ratio_se == rep.ratio_se);
}
