#include "crysgen/crystal.hpp"

#include <cmath>

#include "crysgen/elements.hpp"
#include "crysgen/errors.hpp"

namespace crysgen {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
constexpr double kAvogadroPerE24 = 0.602214076;  // N_A * 1e-24

// Exact zero at 90 degrees keeps orthogonal cells exactly diagonal.
double cos_deg(double x) { return x == 90.0 ? 0.0 : std::cos(x * kDegToRad); }
double sin_deg(double x) { return std::sin(x * kDegToRad); }

}  // namespace

void validate_crystal(const Crystal& c) {
  const int n = c.num_atoms();
  if (n < 1) throw InvalidCrystal("crystal has no atoms");
  if (c.frac_coords.rows() != n) {
    throw InvalidCrystal("atom_types / frac_coords length mismatch");
  }
  for (int z : c.atom_types) {
    if (!is_known_element(z)) {
      throw InvalidCrystal("atomic number outside whitelist: " + std::to_string(z));
    }
  }
  if (!c.frac_coords.allFinite()) throw InvalidCrystal("non-finite fractional coordinate");
  if ((c.frac_coords.array() < 0.0).any() || (c.frac_coords.array() >= 1.0).any()) {
    throw InvalidCrystal("fractional coordinate outside [0,1)");
  }
  if (!c.lattice.allFinite()) throw InvalidCrystal("non-finite lattice entry");
  if (!(c.lattice.determinant() > 0.0)) throw InvalidCrystal("lattice determinant not positive");
}

bool crystal_is_valid(const Crystal& c) {
  try {
    validate_crystal(c);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

Mat3 lattice_from_params(const LatticeParams& p) {
  for (double len : {p.a, p.b, p.c}) {
    if (!(len > 0.0) || !std::isfinite(len)) {
      throw NonPositiveLength("cell length must be positive and finite");
    }
  }
  for (double ang : {p.alpha, p.beta, p.gamma}) {
    if (!std::isfinite(ang) || ang <= 0.0 || ang >= 180.0) {
      throw DegenerateAngles("cell angle must lie in (0, 180)");
    }
  }
  const double ca = cos_deg(p.alpha), cb = cos_deg(p.beta);
  const double cg = cos_deg(p.gamma), sg = sin_deg(p.gamma);
  const double cy = (ca - cb * cg) / sg;
  const double cz2 = 1.0 - cb * cb - cy * cy;
  if (!(cz2 > 1e-12)) {
    throw DegenerateAngles("angles do not define a positive-definite cell");
  }
  Mat3 lattice;
  lattice.row(0) << p.a, 0.0, 0.0;
  lattice.row(1) << p.b * cg, p.b * sg, 0.0;
  lattice.row(2) << p.c * cb, p.c * cy, p.c * std::sqrt(cz2);
  return lattice;
}

LatticeParams params_from_lattice(const Mat3& lattice) {
  if (!lattice.allFinite() || !(lattice.determinant() > 0.0)) {
    throw SingularLattice("lattice determinant must be positive");
  }
  const Vec3 l1 = lattice.row(0), l2 = lattice.row(1), l3 = lattice.row(2);
  LatticeParams p;
  p.a = l1.norm();
  p.b = l2.norm();
  p.c = l3.norm();
  auto angle = [](const Vec3& u, const Vec3& v) {
    const double c = std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0);
    return std::acos(c) / kDegToRad;
  };
  p.alpha = angle(l2, l3);
  p.beta = angle(l1, l3);
  p.gamma = angle(l1, l2);
  return p;
}

double wrap_fractional(double x) {
  if (!std::isfinite(x)) throw NonFiniteInput("wrap_fractional");
  double y = x - std::floor(x);
  if (y >= 1.0) y -= 1.0;  // guards against round-up at the seam
  return y;
}

MatX3 wrap_fractional(const MatX3& x) {
  if (!x.allFinite()) throw NonFiniteInput("wrap_fractional");
  MatX3 y = x;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (int j = 0; j < 3; ++j) y(i, j) = wrap_fractional(y(i, j));
  }
  return y;
}

double wrap_centered(double x) {
  if (!std::isfinite(x)) throw NonFiniteInput("wrap_centered");
  double y = x - std::floor(x + 0.5);
  if (y >= 0.5) y -= 1.0;
  if (y < -0.5) y += 1.0;
  return y;
}

double min_periodic_distance(const Vec3& xi, const Vec3& xj, const Mat3& lattice,
                             int search_radius) {
  if (!lattice.allFinite() || !(lattice.determinant() > 0.0)) {
    throw SingularLattice("lattice determinant must be positive");
  }
  Vec3 d;
  for (int k = 0; k < 3; ++k) d(k) = wrap_fractional(xi(k)) - wrap_fractional(xj(k));
  double best2 = std::numeric_limits<double>::infinity();
  const int r = search_radius;
  for (int k0 = -r; k0 <= r; ++k0) {
    for (int k1 = -r; k1 <= r; ++k1) {
      for (int k2 = -r; k2 <= r; ++k2) {
        const Vec3 f = d + Vec3(k0, k1, k2);
        const double dist2 = (f.transpose() * lattice).squaredNorm();
        if (dist2 < best2) best2 = dist2;
      }
    }
  }
  return std::sqrt(best2);
}

double density(const Crystal& c) {
  const double vol = c.lattice.determinant();
  if (!(vol > 0.0) || !std::isfinite(vol)) {
    throw SingularLattice("cell volume must be positive");
  }
  double mass = 0.0;
  for (int z : c.atom_types) mass += atomic_mass(z);
  return mass / (kAvogadroPerE24 * vol);
}

}  // namespace crysgen
