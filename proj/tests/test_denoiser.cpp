#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "crysgen/denoiser.hpp"
#include "crysgen/diffusion.hpp"
#include "crysgen/errors.hpp"
#include "crysgen/trainer.hpp"

#include "support.hpp"

using namespace crysgen;

namespace {

const DenoiserConfig kTinyCfg{8, 2, 2, kMaxAtomicNumber};

struct Fixture {
  std::vector<int> types;
  MatX3 coords;
  Mat3 lattice;
  int t;
};

Fixture random_fixture(Rng& rng, int n) {
  Fixture f;
  const Crystal c = testsupport::random_crystal(rng, n, 30);
  f.types = c.atom_types;
  f.coords = c.frac_coords;
  f.lattice = c.lattice;
  f.t = 1 + static_cast<int>(rng.uniform_int(1000));
  return f;
}

// Scalar loss over both heads for finite differencing.
double probe_loss(const DenoiserParams& p, const Fixture& f, const Mat3& wl, const MatX3& wx) {
  const DenoiserOutput out = denoiser_forward(p, f.types, f.coords, f.lattice, f.t);
  return (out.lattice_noise.array() * wl.array()).sum() +
         (out.coord_score.array() * wx.array()).sum();
}

double max_grad_rel_error(const DenoiserParams& p, const Fixture& f, std::string* where) {
  Rng rng(77);
  Mat3 wl;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) wl(i, j) = rng.normal();
  }
  MatX3 wx(static_cast<Eigen::Index>(f.types.size()), 3);
  for (Eigen::Index i = 0; i < wx.rows(); ++i) {
    for (int j = 0; j < 3; ++j) wx(i, j) = rng.normal();
  }

  DenoiserCache cache;
  denoiser_forward(p, f.types, f.coords, f.lattice, f.t, &cache);
  const DenoiserParams grads = denoiser_backward(p, cache, wl, wx);

  DenoiserParams probe = p;
  const double h = 1e-4;
  double worst = 0.0;
  for (std::size_t ti = 0; ti < probe.tensors.size(); ++ti) {
    auto& tensor = probe.tensors[ti];
    for (Eigen::Index i = 0; i < tensor.rows(); ++i) {
      for (Eigen::Index j = 0; j < tensor.cols(); ++j) {
        const double keep = tensor(i, j);
        tensor(i, j) = keep + h;
        const double up = probe_loss(probe, f, wl, wx);
        tensor(i, j) = keep - h;
        const double dn = probe_loss(probe, f, wl, wx);
        tensor(i, j) = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double an = grads.tensors[ti](i, j);
        const double denom = std::max(std::abs(fd), std::abs(an));
        if (denom < 1e-7) continue;  // untouched embedding rows etc.
        const double rel = std::abs(fd - an) / denom;
        if (rel > worst) {
          worst = rel;
          if (where) *where = denoiser_tensor_name(p.cfg, static_cast<int>(ti));
        }
      }
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("fourier features: zero input, quarter period, unit period") {
  const Eigen::VectorXd f0 = fourier_features(Vec3::Zero(), 3);
  REQUIRE(f0.size() == 18);
  for (int axis = 0; axis < 3; ++axis) {
    for (int k = 0; k < 3; ++k) {
      CHECK(f0(axis * 6 + 2 * k) == 0.0);      // sin
      CHECK(f0(axis * 6 + 2 * k + 1) == 1.0);  // cos
    }
  }
  const Eigen::VectorXd fq = fourier_features(Vec3(0.25, 0, 0), 1);
  CHECK(fq(0) == doctest::Approx(1.0));
  CHECK(fq(1) == doctest::Approx(0.0).epsilon(1e-12));

  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 dx(rng.normal(), rng.normal(), rng.normal());
    const Eigen::VectorXd a = fourier_features(dx, 4);
    const Eigen::VectorXd b = fourier_features(dx + Vec3::Ones(), 4);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("init: seeded determinism, zero biases, finite smoke forward") {
  const DenoiserParams a = init_denoiser(kTinyCfg, 9);
  const DenoiserParams b = init_denoiser(kTinyCfg, 9);
  const DenoiserParams c = init_denoiser(kTinyCfg, 10);
  REQUIRE(a.tensors.size() == b.tensors.size());
  bool all_equal = true, any_differ = false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    all_equal = all_equal && a.tensors[i] == b.tensors[i];
    any_differ = any_differ || a.tensors[i] != c.tensors[i];
    if (a.tensors[i].cols() == 1) CHECK(a.tensors[i].isZero(0.0));
  }
  CHECK(all_equal);
  CHECK(any_differ);

  Rng rng(3);
  const Fixture f = random_fixture(rng, 20);
  const DenoiserParams big = init_denoiser({32, 8, 3, kMaxAtomicNumber}, 4);
  const DenoiserOutput out = denoiser_forward(big, f.types, f.coords, f.lattice, f.t);
  CHECK(out.lattice_noise.allFinite());
  CHECK(out.coord_score.allFinite());
  CHECK(out.coord_score.rows() == 20);
}

TEST_CASE("permutation equivariance is bit-exact under content-ordered sums") {
  Rng rng(5);
  const DenoiserParams p = init_denoiser({16, 4, 3, kMaxAtomicNumber}, 21);
  for (int trial = 0; trial < 20; ++trial) {
    const Fixture f = random_fixture(rng, 6);
    const DenoiserOutput base = denoiser_forward(p, f.types, f.coords, f.lattice, f.t);

    std::vector<int> perm(f.types.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t k = perm.size(); k > 1; --k) {
      std::swap(perm[k - 1], perm[rng.uniform_int(k)]);
    }
    std::vector<int> ptypes(f.types.size());
    MatX3 pcoords(f.coords.rows(), 3);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      ptypes[i] = f.types[static_cast<std::size_t>(perm[i])];
      pcoords.row(static_cast<Eigen::Index>(i)) = f.coords.row(perm[i]);
    }
    const DenoiserOutput got = denoiser_forward(p, ptypes, pcoords, f.lattice, f.t);

    CHECK(got.lattice_noise == base.lattice_noise);
    for (std::size_t i = 0; i < perm.size(); ++i) {
      CHECK(got.coord_score.row(static_cast<Eigen::Index>(i)) == base.coord_score.row(perm[i]));
    }
  }
}

TEST_CASE("rotation: lattice output is left-equivariant, coords invariant, 50 rotations") {
  Rng rng(6);
  const DenoiserParams p = init_denoiser({16, 4, 3, kMaxAtomicNumber}, 22);
  const Fixture f = random_fixture(rng, 5);
  const DenoiserOutput base = denoiser_forward(p, f.types, f.coords, f.lattice, f.t);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat3 q = testsupport::random_rotation(rng);
    const DenoiserOutput got = denoiser_forward(p, f.types, f.coords, q * f.lattice, f.t);
    const double lat_err = (got.lattice_noise - q * base.lattice_noise).cwiseAbs().maxCoeff();
    const double coord_err = (got.coord_score - base.coord_score).cwiseAbs().maxCoeff();
    CHECK(lat_err < 1e-5);
    CHECK(coord_err < 1e-5);
  }
}

TEST_CASE("periodic translation invariance over 50 random shifts") {
  Rng rng(7);
  const DenoiserParams p = init_denoiser({16, 4, 3, kMaxAtomicNumber}, 23);
  const Fixture f = random_fixture(rng, 5);
  const DenoiserOutput base = denoiser_forward(p, f.types, f.coords, f.lattice, f.t);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 shift(rng.uniform01(), rng.uniform01(), rng.uniform01());
    MatX3 shifted = f.coords;
    for (Eigen::Index i = 0; i < shifted.rows(); ++i) {
      for (int j = 0; j < 3; ++j) {
        shifted(i, j) = wrap_fractional(shifted(i, j) + shift(j));
      }
    }
    const DenoiserOutput got = denoiser_forward(p, f.types, shifted, f.lattice, f.t);
    CHECK((got.lattice_noise - base.lattice_noise).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((got.coord_score - base.coord_score).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("backward matches central finite differences at init") {
  Rng rng(8);
  const Fixture f = random_fixture(rng, 3);
  const DenoiserParams p = init_denoiser(kTinyCfg, 31);
  std::string where;
  const double worst = max_grad_rel_error(p, f, &where);
  INFO("worst tensor: " << where);
  CHECK(worst < 1e-3);
}

TEST_CASE("backward matches finite differences after 100 training steps") {
  Rng rng(9);
  std::vector<Crystal> data;
  for (int i = 0; i < 8; ++i) data.push_back(testsupport::random_crystal(rng, 3, 20));
  TrainConfig cfg;
  cfg.net = kTinyCfg;
  cfg.batch_size = 4;
  cfg.max_steps = 100;
  cfg.diffusion_steps = 50;
  cfg.seed = 17;
  const Checkpoint ck = train(cfg, data);
  CHECK(ck.step == 100);

  const Fixture f{data[0].atom_types, data[0].frac_coords,
                  fit_standardizer(data, true).standardize(data[0].lattice), 25};
  std::string where;
  const double worst = max_grad_rel_error(ck.params, f, &where);
  INFO("worst tensor: " << where);
  CHECK(worst < 1e-3);
}

TEST_CASE("backward: zero upstream gives zero grads; gradients add over upstreams") {
  Rng rng(10);
  const Fixture f = random_fixture(rng, 3);
  const DenoiserParams p = init_denoiser(kTinyCfg, 32);
  DenoiserCache cache;
  denoiser_forward(p, f.types, f.coords, f.lattice, f.t, &cache);

  const DenoiserParams zero = denoiser_backward(p, cache, Mat3::Zero(), MatX3::Zero(3, 3));
  for (const auto& t : zero.tensors) CHECK(t.isZero(0.0));

  Mat3 wl1, wl2;
  MatX3 wx1(3, 3), wx2(3, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      wl1(i, j) = rng.normal();
      wl2(i, j) = rng.normal();
      wx1(i, j) = rng.normal();
      wx2(i, j) = rng.normal();
    }
  }
  const DenoiserParams ga = denoiser_backward(p, cache, wl1, wx1);
  const DenoiserParams gb = denoiser_backward(p, cache, wl2, wx2);
  const DenoiserParams gsum = denoiser_backward(p, cache, wl1 + wl2, wx1 + wx2);
  for (std::size_t i = 0; i < gsum.tensors.size(); ++i) {
    CHECK((gsum.tensors[i] - ga.tensors[i] - gb.tensors[i]).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("backward rejects a stale or foreign cache") {
  Rng rng(11);
  const Fixture f = random_fixture(rng, 2);
  const DenoiserParams p = init_denoiser(kTinyCfg, 33);
  const DenoiserParams other = init_denoiser(kTinyCfg, 34);
  DenoiserCache cache;
  denoiser_forward(p, f.types, f.coords, f.lattice, f.t, &cache);
  CHECK_THROWS_AS(denoiser_backward(other, cache, Mat3::Zero(), MatX3::Zero(2, 3)), StaleCache);
  DenoiserCache unfilled;
  CHECK_THROWS_AS(denoiser_backward(p, unfilled, Mat3::Zero(), MatX3::Zero(2, 3)), StaleCache);
}

TEST_CASE("forward input validation") {
  const DenoiserParams p = init_denoiser(kTinyCfg, 35);
  Rng rng(12);
  const Fixture f = random_fixture(rng, 2);
  CHECK_THROWS_AS(denoiser_forward(p, {}, MatX3::Zero(0, 3), f.lattice, 1), ShapeMismatch);
  CHECK_THROWS_AS(denoiser_forward(p, {1, 2}, MatX3::Zero(1, 3), f.lattice, 1), ShapeMismatch);
  CHECK_THROWS_AS(denoiser_forward(p, {101, 1}, MatX3::Zero(2, 3), f.lattice, 1), ShapeMismatch);
}
