#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles here
// must stay decoupled from the library code paths they check.

#include <cmath>
#include <vector>

#include "crysgen/crystal.hpp"
#include "crysgen/rng.hpp"

namespace testsupport {

using crysgen::Mat3;
using crysgen::MatX3;
using crysgen::Vec3;

// Random rotation with det +1 via Gram-Schmidt on gaussian columns.
inline Mat3 random_rotation(crysgen::Rng& rng) {
  Mat3 m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Mat3> qr(m);
  Mat3 q = qr.householderQ();
  if (q.determinant() < 0) q.col(0) *= -1.0;
  return q;
}

inline crysgen::Crystal simple_cubic(std::vector<int> types, double cell) {
  crysgen::Crystal c;
  const int n = static_cast<int>(types.size());
  c.atom_types = std::move(types);
  c.frac_coords.resize(n, 3);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) {
      c.frac_coords(i, j) = static_cast<double>((i * 3 + j) % 7) / 7.0;
    }
  }
  c.lattice = cell * Mat3::Identity();
  return c;
}

inline crysgen::Crystal rocksalt_nacl() {
  crysgen::Crystal c;
  c.atom_types = {11, 17};
  c.frac_coords.resize(2, 3);
  c.frac_coords << 0.0, 0.0, 0.0, 0.5, 0.5, 0.5;
  c.lattice = 5.64 * Mat3::Identity();
  return c;
}

inline crysgen::Crystal random_crystal(crysgen::Rng& rng, int n_atoms, int max_z = 40) {
  crysgen::Crystal c;
  c.frac_coords.resize(n_atoms, 3);
  for (int i = 0; i < n_atoms; ++i) {
    c.atom_types.push_back(1 + static_cast<int>(rng.uniform_int(max_z)));
    for (int j = 0; j < 3; ++j) c.frac_coords(i, j) = rng.uniform01();
  }
  crysgen::LatticeParams p;
  p.a = 3.0 + 4.0 * rng.uniform01();
  p.b = 3.0 + 4.0 * rng.uniform01();
  p.c = 3.0 + 4.0 * rng.uniform01();
  p.alpha = 70.0 + 40.0 * rng.uniform01();
  p.beta = 70.0 + 40.0 * rng.uniform01();
  p.gamma = 70.0 + 40.0 * rng.uniform01();
  c.lattice = crysgen::lattice_from_params(p);
  return c;
}

// Brute-force wrapped-normal log density over images [-k_span, k_span],
// evaluated in extended precision.
inline long double wrapped_log_density(long double d, long double sigma, int k_span = 20) {
  long double m = -1e30L;
  for (int k = -k_span; k <= k_span; ++k) {
    const long double u = d + k;
    m = std::max(m, -u * u / (2.0L * sigma * sigma));
  }
  long double acc = 0.0L;
  for (int k = -k_span; k <= k_span; ++k) {
    const long double u = d + k;
    acc += std::exp(-u * u / (2.0L * sigma * sigma) - m);
  }
  return m + std::log(acc);
}

inline double wrapped_score_fd(double d, double sigma, double h = 1e-4) {
  const long double up = wrapped_log_density(d + h, sigma);
  const long double dn = wrapped_log_density(d - h, sigma);
  return static_cast<double>((up - dn) / (2.0L * h));
}

}  // namespace testsupport
