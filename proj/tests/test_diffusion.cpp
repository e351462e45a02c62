#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "crysgen/diffusion.hpp"
#include "crysgen/errors.hpp"

#include "support.hpp"

using namespace crysgen;

TEST_CASE("make_schedules: endpoints, monotonicity, log-spacing") {
  const DiffusionSchedules s = make_schedules(1000);
  CHECK(s.alpha_bar(1) > 0.999);
  CHECK(s.alpha_bar(1000) < 0.01);
  CHECK(s.sigma(1) == doctest::Approx(0.005));
  CHECK(s.sigma(1000) == doctest::Approx(0.5));
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.sigma(0) == 0.0);

  // log sigma linear in t.
  const double slope = std::log(s.sigma(2)) - std::log(s.sigma(1));
  for (int t = 2; t < 1000; ++t) {
    CHECK(std::log(s.sigma(t + 1)) - std::log(s.sigma(t)) == doctest::Approx(slope).epsilon(1e-9));
  }

  const DiffusionSchedules tiny = make_schedules(10);
  for (int t = 1; t < 10; ++t) {
    CHECK(tiny.alpha_bar(t + 1) < tiny.alpha_bar(t));
    CHECK(tiny.sigma(t + 1) > tiny.sigma(t));
    CHECK(tiny.beta(t) > 0.0);
    CHECK(tiny.beta(t) < 1.0);
  }

  CHECK_THROWS_AS(make_schedules(1), BadScheduleParams);
  CHECK_THROWS_AS(make_schedules(100, 0.5, 0.1), BadScheduleParams);
  CHECK_THROWS_AS(make_schedules(100, 0.005, 0.05), BadScheduleParams);  // far from uniform
}

TEST_CASE("terminal wrapped normal is numerically close to uniform") {
  const DiffusionSchedules s = make_schedules(1000);
  CHECK(s.terminal_tv_uniform < 5e-3);
  CHECK(wrapped_normal_tv_uniform(0.6) < 1e-3);
  // Theta-series bound check at the default terminal sigma.
  CHECK(s.terminal_tv_uniform == doctest::Approx(wrapped_normal_tv_uniform(0.5)));
}

TEST_CASE("forward_lattice: closed form and limits") {
  const DiffusionSchedules s = make_schedules(1000);
  Rng rng(1);
  Mat3 l0, eps;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      l0(i, j) = rng.normal();
      eps(i, j) = rng.normal();
    }
  }
  const int t = 500;
  const Mat3 lt = forward_lattice(l0, t, eps, s);
  const double ab = s.alpha_bar(t);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(lt(i, j) ==
            doctest::Approx(std::sqrt(ab) * l0(i, j) + std::sqrt(1 - ab) * eps(i, j)));
    }
  }

  // Synthetic schedules exercise the exact no-noise / pure-noise limits.
  DiffusionSchedules degen = s;
  degen.alpha_bars[7] = 1.0;
  CHECK(forward_lattice(l0, 7, eps, degen) == l0);
  degen.alpha_bars[7] = 0.0;
  CHECK(forward_lattice(l0, 7, eps, degen) == eps);

  CHECK_THROWS_AS(forward_lattice(l0, 0, eps, s), BadTimestep);
  CHECK_THROWS_AS(forward_lattice(l0, 1001, eps, s), BadTimestep);
}

TEST_CASE("forward_coords: wrapping and small-sigma limit") {
  const DiffusionSchedules s = make_schedules(1000);
  MatX3 x0(1, 3);
  x0 << 0.9, 0.25, 0.5;
  MatX3 eps(1, 3);
  eps << 1.0, 0.0, 0.0;

  DiffusionSchedules custom = s;
  custom.sigmas[5] = 0.2;
  const MatX3 xt = forward_coords(x0, 5, eps, custom);
  CHECK(xt(0, 0) == doctest::Approx(0.1));  // 0.9 + 0.2 wraps
  CHECK(xt(0, 1) == doctest::Approx(0.25));

  custom.sigmas[5] = 1e-12;
  const MatX3 still = forward_coords(x0, 5, eps, custom);
  CHECK(still(0, 0) == doctest::Approx(0.9));

  for (Eigen::Index i = 0; i < xt.rows(); ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(xt(i, j) >= 0.0);
      CHECK(xt(i, j) < 1.0);
    }
  }
  CHECK_THROWS_AS(forward_coords(x0, 0, eps, s), BadTimestep);
}

TEST_CASE("forward_coords at sigma_T is uniform: KS statistic < 0.01 over 1e5 draws") {
  const DiffusionSchedules s = make_schedules(1000);
  const int n = 100000;
  const int rows = n / 4;
  MatX3 x0 = MatX3::Constant(rows, 3, 0.37);
  Rng rng(2024);
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(rows) * 3);
  MatX3 eps(rows, 3);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < 3; ++j) eps(i, j) = rng.normal();
  }
  const MatX3 xt = forward_coords(x0, 1000, eps, s);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < 3; ++j) samples.push_back(xt(i, j));
  }
  std::sort(samples.begin(), samples.end());
  double ks = 0.0;
  const double m = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ks = std::max(ks, std::abs(samples[i] - (i + 1) / m));
    ks = std::max(ks, std::abs(samples[i] - i / m));
  }
  CHECK(ks < 0.01);
}

TEST_CASE("forward_coords is periodic-translation compatible") {
  const DiffusionSchedules s = make_schedules(100, 0.01, 0.6);
  Rng rng(9);
  MatX3 x0(4, 3), eps(4, 3);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      x0(i, j) = rng.uniform01();
      eps(i, j) = rng.normal();
    }
  }
  const double shift = 0.37;
  const MatX3 a = forward_coords(wrap_fractional(x0.array() + shift), 50, eps, s);
  const MatX3 b = wrap_fractional((forward_coords(x0, 50, eps, s).array() + shift));
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(wrap_centered(a(i, j) - b(i, j)) == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("wn_score: zero at the origin, odd, periodic") {
  CHECK(wn_score(0.0, 0.5) == 0.0);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const double d = rng.uniform01() - 0.5;
    const double sigma = 0.05 + rng.uniform01();
    CHECK(wn_score(-d, sigma) == doctest::Approx(-wn_score(d, sigma)).epsilon(1e-9));
    CHECK(wn_score(d + 1.0, sigma) == doctest::Approx(wn_score(d, sigma)).epsilon(1e-9));
    CHECK(wn_score(d - 2.0, sigma) == doctest::Approx(wn_score(d, sigma)).epsilon(1e-9));
  }
  CHECK_THROWS_AS(wn_score(0.1, 0.0), NonPositiveSigma);
}

TEST_CASE("wn_score matches the finite-difference oracle on a 100-point grid") {
  for (const double sigma : {0.01, 0.1, 0.5, 1.0}) {
    for (int i = 0; i < 100; ++i) {
      const double d = -0.5 + (i + 0.5) * 0.01;
      const double got = wn_score(d, sigma);
      const double want = testsupport::wrapped_score_fd(d, sigma);
      const double denom = std::max({std::abs(got), std::abs(want), 1e-12});
      CHECK(std::abs(got - want) / denom < 1e-5);
    }
  }
}

TEST_CASE("wn_score narrow-sigma limit: single gaussian image dominates") {
  const double sigma = 0.01, d = 0.1;
  CHECK(wn_score(d, sigma) == doctest::Approx(-d / (sigma * sigma)).epsilon(1e-6));
}

TEST_CASE("wn_score flat regime: sup norm below 1e-3 for sigma >= 2") {
  for (const double sigma : {2.0, 3.0, 5.0}) {
    double worst = 0.0;
    for (int i = 0; i < 101; ++i) {
      worst = std::max(worst, std::abs(wn_score(-0.5 + i * 0.01, sigma)));
    }
    CHECK(worst < 1e-3);
  }
}

TEST_CASE("losses: identities and elementwise oracle") {
  MatX3 a = MatX3::Zero(2, 3);
  MatX3 ones = MatX3::Constant(2, 3, 1.0);
  CHECK(coord_loss(ones, ones) == 0.0);
  CHECK(coord_loss(a, ones) == doctest::Approx(1.0));

  Mat3 la = Mat3::Zero(), lb = Mat3::Constant(1.0);
  CHECK(lattice_loss(lb, lb) == 0.0);
  CHECK(lattice_loss(la, lb) == doctest::Approx(1.0));

  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    MatX3 x(3, 3), y(3, 3);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        x(i, j) = rng.normal();
        y(i, j) = rng.normal();
      }
    }
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) acc += (x(i, j) - y(i, j)) * (x(i, j) - y(i, j));
    }
    CHECK(coord_loss(x, y) == doctest::Approx(acc / 9.0).epsilon(1e-12));
  }
  MatX3 bad(1, 3);
  CHECK_THROWS_AS(coord_loss(a, bad), ShapeMismatch);
}
