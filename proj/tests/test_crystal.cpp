#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crysgen/crystal.hpp"
#include "crysgen/errors.hpp"

#include "support.hpp"

using namespace crysgen;

TEST_CASE("lattice_from_params: cubic and orthorhombic are exact diagonals") {
  const Mat3 cube = lattice_from_params({5, 5, 5, 90, 90, 90});
  CHECK(cube == 5.0 * Mat3::Identity());
  const Mat3 ortho = lattice_from_params({2, 3, 4, 90, 90, 90});
  Mat3 expect = Mat3::Zero();
  expect(0, 0) = 2;
  expect(1, 1) = 3;
  expect(2, 2) = 4;
  CHECK(ortho == expect);
}

TEST_CASE("lattice_from_params: hexagonal-like dot products match the closed form") {
  const LatticeParams p{1, 1, 1, 90, 90, 120};
  const Mat3 l = lattice_from_params(p);
  // Oracle: pairwise dot products from lengths and angles.
  const double deg = 3.14159265358979323846 / 180.0;
  const double expected[3][3] = {
      {p.a * p.a, p.a * p.b * std::cos(p.gamma * deg), p.a * p.c * std::cos(p.beta * deg)},
      {0, p.b * p.b, p.b * p.c * std::cos(p.alpha * deg)},
      {0, 0, p.c * p.c}};
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      CHECK(l.row(i).dot(l.row(j)) == doctest::Approx(expected[i][j]).epsilon(1e-12));
    }
  }
  CHECK(l.row(0).dot(l.row(1)) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(l.determinant() > 0.0);
}

TEST_CASE("lattice_from_params: rejections") {
  CHECK_THROWS_AS(lattice_from_params({-1, 1, 1, 90, 90, 90}), NonPositiveLength);
  CHECK_THROWS_AS(lattice_from_params({1, 1, 1, 90, 90, 181}), DegenerateAngles);
  CHECK_THROWS_AS(lattice_from_params({1, 1, 1, 170, 170, 170}), DegenerateAngles);
  CHECK_THROWS_AS(lattice_from_params({1, 1, 1, 5, 90, 100}), DegenerateAngles);
}

TEST_CASE("params_from_lattice: diagonal cells") {
  const LatticeParams p = params_from_lattice(5.0 * Mat3::Identity());
  CHECK(p.a == doctest::Approx(5.0));
  CHECK(p.alpha == doctest::Approx(90.0));
  Mat3 ortho = Mat3::Zero();
  ortho(0, 0) = 2;
  ortho(1, 1) = 3;
  ortho(2, 2) = 4;
  const LatticeParams q = params_from_lattice(ortho);
  CHECK(q.a == doctest::Approx(2.0));
  CHECK(q.b == doctest::Approx(3.0));
  CHECK(q.c == doctest::Approx(4.0));
  CHECK_THROWS_AS(params_from_lattice(Mat3::Zero()), SingularLattice);
}

TEST_CASE("params_from_lattice: invariant under rigid rotation, 100 trials") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Crystal c = testsupport::random_crystal(rng, 2);
    const Mat3 rot = testsupport::random_rotation(rng);
    // Rows are lattice vectors, so a spatial rotation acts on the right.
    const LatticeParams a = params_from_lattice(c.lattice);
    const LatticeParams b = params_from_lattice(c.lattice * rot);
    CHECK(b.a == doctest::Approx(a.a).epsilon(1e-9));
    CHECK(b.b == doctest::Approx(a.b).epsilon(1e-9));
    CHECK(b.c == doctest::Approx(a.c).epsilon(1e-9));
    CHECK(b.alpha == doctest::Approx(a.alpha).epsilon(1e-9));
    CHECK(b.beta == doctest::Approx(a.beta).epsilon(1e-9));
    CHECK(b.gamma == doctest::Approx(a.gamma).epsilon(1e-9));
  }
}

TEST_CASE("round trip params -> lattice -> params at 1e-9 relative") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    LatticeParams p;
    p.a = 0.5 + 8.0 * rng.uniform01();
    p.b = 0.5 + 8.0 * rng.uniform01();
    p.c = 0.5 + 8.0 * rng.uniform01();
    p.alpha = 55.0 + 70.0 * rng.uniform01();
    p.beta = 55.0 + 70.0 * rng.uniform01();
    p.gamma = 55.0 + 70.0 * rng.uniform01();
    Mat3 lattice;
    try {
      lattice = lattice_from_params(p);
    } catch (const DegenerateAngles&) {
      continue;
    }
    const LatticeParams q = params_from_lattice(lattice);
    CHECK(q.a == doctest::Approx(p.a).epsilon(1e-9));
    CHECK(q.b == doctest::Approx(p.b).epsilon(1e-9));
    CHECK(q.c == doctest::Approx(p.c).epsilon(1e-9));
    CHECK(q.alpha == doctest::Approx(p.alpha).epsilon(1e-9));
    CHECK(q.beta == doctest::Approx(p.beta).epsilon(1e-9));
    CHECK(q.gamma == doctest::Approx(p.gamma).epsilon(1e-9));
  }
}

TEST_CASE("wrap_fractional: examples, idempotence, periodicity") {
  CHECK(wrap_fractional(1.25) == doctest::Approx(0.25));
  CHECK(wrap_fractional(-0.30) == doctest::Approx(0.70));
  CHECK(wrap_fractional(0.50) == 0.50);
  CHECK_THROWS_AS(wrap_fractional(std::nan("")), NonFiniteInput);

  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const double x = 40.0 * (rng.uniform01() - 0.5);
    const double w = wrap_fractional(x);
    CHECK(w >= 0.0);
    CHECK(w < 1.0);
    CHECK(wrap_fractional(w) == w);  // idempotent, bit-exact
    const int k = static_cast<int>(rng.uniform_int(7)) - 3;
    CHECK(wrap_fractional(x + k) == doctest::Approx(w).epsilon(1e-9));
  }
  // Grid sweep across the seam.
  for (int i = -30; i <= 30; ++i) {
    const double w = wrap_fractional(i * 0.1);
    CHECK(w >= 0.0);
    CHECK(w < 1.0);
  }
}

TEST_CASE("min_periodic_distance: wraparound beats the direct path") {
  const Mat3 box = 10.0 * Mat3::Identity();
  CHECK(min_periodic_distance({0.1, 0, 0}, {0.9, 0, 0}, box) == doctest::Approx(2.0));
  CHECK(min_periodic_distance({0.3, 0.7, 0.2}, {0.3, 0.7, 0.2}, box) == 0.0);
  CHECK_THROWS_AS(min_periodic_distance({0, 0, 0}, {0.5, 0, 0}, Mat3::Zero()), SingularLattice);
}

TEST_CASE("min_periodic_distance: brute-force offset oracle on random cells") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Crystal c = testsupport::random_crystal(rng, 2);
    const Vec3 xi = c.frac_coords.row(0);
    const Vec3 xj = c.frac_coords.row(1);
    // Oracle: exhaustive offsets in [-3, 3]^3.
    double best = std::numeric_limits<double>::infinity();
    const Vec3 d = xi - xj;
    for (int k0 = -3; k0 <= 3; ++k0) {
      for (int k1 = -3; k1 <= 3; ++k1) {
        for (int k2 = -3; k2 <= 3; ++k2) {
          best = std::min(best, ((d + Vec3(k0, k1, k2)).transpose() * c.lattice).norm());
        }
      }
    }
    const double got = min_periodic_distance(xi, xj, c.lattice, 2);
    CHECK(got == doctest::Approx(best).epsilon(1e-12));
    // Invariance under wrapping and swapping.
    CHECK(min_periodic_distance(xj, xi, c.lattice, 2) == doctest::Approx(got).epsilon(1e-12));
    const Vec3 xi_shift(wrap_fractional(xi(0) + 2.0), xi(1), xi(2));
    CHECK(min_periodic_distance(xi_shift, xj, c.lattice, 2) ==
          doctest::Approx(got).epsilon(1e-9));
  }
}

TEST_CASE("density: hydrogen reference value, volume scaling, additivity") {
  Crystal c;
  c.atom_types = {1};
  c.frac_coords = MatX3::Zero(1, 3);
  c.lattice = Mat3::Identity();
  const double rho = density(c);
  // 1.008 / (6.02214076e23 * 1e-24)
  CHECK(rho == doctest::Approx(1.6738).epsilon(1e-4));

  Crystal big = c;
  big.lattice = 2.0 * c.lattice;
  CHECK(density(big) == doctest::Approx(rho / 8.0).epsilon(1e-12));

  Crystal two = c;
  two.atom_types = {1, 1};
  two.frac_coords = MatX3::Zero(2, 3);
  two.frac_coords(1, 0) = 0.5;
  CHECK(density(two) == doctest::Approx(2.0 * rho).epsilon(1e-12));

  Crystal bad = c;
  bad.lattice = Mat3::Zero();
  CHECK_THROWS_AS(density(bad), SingularLattice);
}

TEST_CASE("crystal validation rejects out-of-whitelist and unwrapped input") {
  Crystal c = testsupport::rocksalt_nacl();
  CHECK(crystal_is_valid(c));
  Crystal z = c;
  z.atom_types[0] = 120;
  CHECK(!crystal_is_valid(z));
  Crystal u = c;
  u.frac_coords(0, 0) = 1.0;
  CHECK(!crystal_is_valid(u));
  Crystal e = c;
  e.atom_types.clear();
  e.frac_coords.resize(0, 3);
  CHECK(!crystal_is_valid(e));
}
