#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dsheat/lattice.hpp"

using namespace dsheat;

TEST_CASE("box geometry") {
  const Box b = Box::ball(2, 2);
  CHECK(b.size() == 25);
  CHECK(b.radius() == 2);
  CHECK(b.contains(Site{2, -2, 0}));
  CHECK_FALSE(b.contains(Site{3, 0, 0}));
  CHECK(b.eroded(2).size() == 1);
  CHECK(b.eroded(3).is_empty());
  CHECK(b.dilated(1) == Box::ball(2, 3));
  CHECK(b.intersect(Box(2, {1, 1, 0}, {5, 5, 0})) == Box(2, {1, 1, 0}, {2, 2, 0}));
  CHECK(Box::empty(2).hull(b) == b);
  CHECK(Box::empty(1).size() == 0);
}

TEST_CASE("row-major index round trip") {
  const Box b(3, {-1, 0, 2}, {1, 2, 3});
  std::size_t expected = 0;
  b.for_each([&](const Site& s, std::size_t i) {
    CHECK(i == expected++);
    CHECK(b.index(s) == i);
    CHECK(b.site(i) == s);
  });
  CHECK(expected == b.size());
}

TEST_CASE("rows of a nested box map to contiguous outer segments") {
  const Box outer(2, {-3, -3, 0}, {3, 4, 0});
  const Box inner(2, {-1, 0, 0}, {2, 2, 0});
  std::size_t visited = 0;
  for_each_row(inner, outer, [&](std::size_t ii, std::size_t oi, std::size_t len) {
    CHECK(len == 3);
    for (std::size_t k = 0; k < len; ++k) CHECK(outer.index(inner.site(ii + k)) == oi + k);
    visited += len;
  });
  CHECK(visited == inner.size());
}

TEST_CASE("fields drop exact zeros only") {
  LatticeField f(1);
  f.set({3, 0, 0}, 2.0);
  f.set({-1, 0, 0}, 1e-300);
  CHECK(f.support_radius() == 3);
  CHECK(f.support_count() == 2);
  f.set({3, 0, 0}, 0.0);
  CHECK(f.support_radius() == 1);
  CHECK(f.support_count() == 1);
  f.trim();
  CHECK(f.storage() == Box(1, {-1, 0, 0}, {-1, 0, 0}));
  CHECK(f({-1, 0, 0}) == 1e-300);
  CHECK(f({100, 0, 0}) == 0.0);
}

TEST_CASE("support box stays correct after trim and later writes") {
  LatticeField f = LatticeField::delta(2);
  f.trim();
  CHECK(f.support_box() == Box::ball(2, 0));
  f.add({0, 2, 0}, 1.0);
  CHECK(f.support_box() == Box(2, {0, 0, 0}, {0, 2, 0}));
  f.trim();
  f.mutable_values()[0] = 0.0;
  CHECK(f.support_box() == Box(2, {0, 2, 0}, {0, 2, 0}));
  LatticeField z(2);
  z.trim();
  CHECK(z.is_zero());
  CHECK(z.support_radius() == 0);
  CHECK(z.support_box().is_empty());
}

TEST_CASE("sup norm, total and differences") {
  LatticeField a = LatticeField::uniform_box(1, 2, 1.5);
  CHECK(a.total() == doctest::Approx(7.5));
  CHECK(a.sup_norm() == 1.5);
  LatticeField b = a;
  b.add({5, 0, 0}, -4.0);
  CHECK(max_abs_diff(a, b) == 4.0);
  CHECK(max_abs_diff(b, a) == 4.0);
  a.add_field(b);
  CHECK(a({0, 0, 0}) == 3.0);
  CHECK(a({5, 0, 0}) == -4.0);
}

TEST_CASE("restriction marks the resolved region") {
  const LatticeField a = LatticeField::uniform_box(1, 3, 2.0);
  const LatticeField r = a.restricted_to(Box::ball(1, 1));
  REQUIRE(r.resolved().has_value());
  CHECK(*r.resolved() == Box::ball(1, 1));
  CHECK(r.total() == 6.0);
  CHECK_FALSE(r.is_exact_everywhere());
  CHECK(a.is_exact_everywhere());
}

TEST_CASE("invalid construction") {
  CHECK_THROWS_AS(Box(0, {0, 0, 0}, {0, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(LatticeField(4), std::invalid_argument);
  CHECK_THROWS_AS(LatticeField(Box::ball(1, 1), {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(LatticeField::delta(1, 1.0, {2, 0, 0}).expanded_to(Box::ball(1, 1)), std::invalid_argument);
}
